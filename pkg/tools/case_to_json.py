#!/usr/bin/env python3
#
# Convert a MATPOWER case file (subset) into the internal JSON network format.
#
# Usage: tools/case_to_json.py data/case33.m [out.json] [pcc_voltage]
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "hostcap"))

import netmodel  # noqa: E402
from errors import NetworkError  # noqa: E402

if len(sys.argv) < 2:
    print("Usage: %s CASE.m [OUT.json] [PCC_VOLTAGE]" % sys.argv[0])
    sys.exit(2)

pcc = float(sys.argv[3]) if len(sys.argv) > 3 else netmodel.DEFAULT_PCC_VOLTAGE

try:
    net = netmodel.load_network(sys.argv[1], pcc)
except NetworkError as e:
    print("Error            : %s" % e)
    sys.exit(3)

text = netmodel.network_to_json(net)
if len(sys.argv) > 2:
    with open(sys.argv[2], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print("Network          : %s" % net.name)
    print("Buses / branches : %d / %d" % (net.n_bus, len(net.branches)))
    print("Peak load        : %g MW" % net.peak_load_mw)
    print("Written to       : %s" % sys.argv[2])
else:
    sys.stdout.write(text)
