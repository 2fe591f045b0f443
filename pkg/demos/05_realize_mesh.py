"""Write the surface (x, y, u) for z^3/6 as CSV and OBJ through the command line."""
import json
import pathlib
import sys
import tempfile

from skaffine.cli import main

out = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path(tempfile.mkdtemp())
out.mkdir(parents=True, exist_ok=True)
config = {
    "m": 1,
    "F": "z1^3/6",
    "base": [[0, 1]],
    "plan": {"kind": "grid", "x": [-1, 1, 21], "v": [-1, 1, 21]},
    "path_policy": "crossing",  # u stays finite across the degenerate row v = 0
    "out": {"report": str(out / "report.json"), "csv": str(out / "cubic.csv"), "obj": str(out / "cubic.obj")},
}
(out / "run.json").write_text(json.dumps(config, indent=2))

code = main(["realize", "--config", str(out / "run.json")])
report = json.loads((out / "report.json").read_text())
print("exit", code, report["counts"])
print("files in", out, sorted(p.name for p in out.iterdir()))
