"""
A tour of the test corpus
=========================

The property tests run every corpus program on every input.  Here we only
run ``find`` over each of them and tabulate the result next to the slice
ratio, which shows how much of each instrumented program symbolic
execution can skip.
"""

import re
import warnings
from pathlib import Path

from minisse import RunConfig, run_find
from minisse.driver import summary

root = Path(__file__).resolve().parent.parent / "tests" / "corpus"
data = Path(__file__).resolve().parent.parent / "src" / "minisse" / "data"
machines = {"lock": data / "lock.sm", "file": root / "file.sm"}

print(f"{'program':28} {'result':20} {'sliced':>7}  findings")
for path in sorted(root.glob("*.mc")):
    head = dict(re.findall(r"^// (\w+): *(\S*)", path.read_text(), re.M))
    config = RunConfig(str(path), str(machines[head["machine"]]), head["entry"],
                       int_width=8, wall_timeout=10.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        verdicts = run_find(config)
    found = ", ".join(f"{v.target}/{v.error_state}" if v.target else v.verdict
                      for v in verdicts)
    ratio = f"{100 * verdicts[0].slice_ratio:.1f}%" if verdicts else "-"
    print(f"{path.stem:28} {summary(verdicts):20} {ratio:>7}  {found}")
