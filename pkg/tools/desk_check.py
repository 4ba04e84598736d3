#!/usr/bin/env python3
#
# Run a pipeline configuration and compare the held-out metrics and HC values with the
# published 33-bus reference bands.
#
# Usage: tools/desk_check.py [conf/pipeline-case33.json] [OUT_DIR]
import os
import sys
import time

my_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(my_dir, "..", "hostcap"))

import hc  # noqa: E402
import hostcap  # noqa: E402
from errors import HostCapError  # noqa: E402

BANDS = {
    "gpr r2": (0.80, 0.92),
    "gpr accuracy": (0.85, 0.93),
    "logit accuracy": (0.85, 0.93),
    "gp_mean": (0.52, 0.72),
    "gp_bounds lower": (0.34, 0.54),
    "gp_bounds upper": (0.70, 0.90),
    "gp_cc beta=0.05": (0.37, 0.57),
    "logit_cc beta=0.05": (0.34, 0.54),
}

conf = sys.argv[1] if len(sys.argv) > 1 else os.path.join(my_dir, "..", "conf", "pipeline-case33.json")
out = sys.argv[2] if len(sys.argv) > 2 else None

start = time.time()
try:
    config = hostcap.HostCap.read_config(conf, output_dir=out)
    app = hostcap.HostCap(config)
    results = app.run_pipeline()
    bundle = hostcap.read_bundle(app.path(hostcap.MODELS_FILE))
except HostCapError as e:
    print("Error              : %s" % e)
    sys.exit(e.exit_code)

values = {
    "gpr r2": bundle.metrics["gpr"]["r2"],
    "gpr accuracy": bundle.metrics["gpr"]["accuracy"],
    "logit accuracy": bundle.metrics["logit"]["accuracy"],
}
for r in results:
    if r.method == hc.GP_MEAN:
        values["gp_mean"] = r.hc
    elif r.method == hc.GP_BOUNDS and r.parameters.get("alpha") == 0.05:
        values["gp_bounds " + r.bound] = r.hc
    elif r.parameters.get("beta") == 0.05:
        values[r.method + " beta=0.05"] = r.hc

outside = 0
print("Time               : %.1f s" % (time.time() - start))
print("Control mode       : %s" % config.control.mode)
for name, (lo, hi) in BANDS.items():
    if name not in values:
        print("%-18s : not computed" % name)
        continue
    inside = lo <= values[name] <= hi
    outside += 0 if inside else 1
    print("%-18s : %.4f  [%.2f, %.2f] %s" % (name, values[name], lo, hi, "ok" if inside else "OUTSIDE"))
print("Outside band       : %d" % outside)
