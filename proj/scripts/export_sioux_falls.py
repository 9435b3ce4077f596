"""Write the Sioux-Falls instance bundled with aequilibrae as TNTP text files.

Usage: python scripts/export_sioux_falls.py <aequilibrae-wheel> <out-dir>

The aequilibrae wheel ships reference_files/sioux_falls.zip, which contains the
standard Sioux-Falls link table (SQLite) and demand matrix (OMX/HDF5).
"""
import io
import sqlite3
import sys
import tempfile
import zipfile
from pathlib import Path

import h5py
import numpy as np


def main(wheel: str, out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as w, tempfile.TemporaryDirectory() as tmp:
        inner = w.read("aequilibrae/reference_files/sioux_falls.zip")
        zipfile.ZipFile(io.BytesIO(inner)).extractall(tmp)
        con = sqlite3.connect(Path(tmp) / "project_database.sqlite")
        links = list(con.execute(
            "select a_node, b_node, capacity_ab, free_flow_time, b, power "
            "from links order by link_id"))
        with h5py.File(Path(tmp) / "matrices" / "demand.omx") as f:
            demand = np.array(f["data"]["matrix"])

    nodes = max(max(a, b) for a, b, *_ in links)
    zones = demand.shape[0]
    with open(out / "SiouxFalls_net.tntp", "w", newline="\n") as f:
        f.write(f"<NUMBER OF ZONES> {zones}\n<NUMBER OF NODES> {nodes}\n")
        f.write(f"<FIRST THRU NODE> 1\n<NUMBER OF LINKS> {len(links)}\n")
        f.write("<END OF METADATA>\n\n\n")
        f.write("~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time"
                "\tb\tpower\tspeed\ttoll\tlink_type\t;\n")
        for a, b, cap, fft, bb, power in links:
            f.write(f"\t{a}\t{b}\t{cap:.5f}\t{fft:g}\t{fft:g}\t{bb:g}\t{power:g}"
                    "\t0\t0\t1\t;\n")
    with open(out / "SiouxFalls_trips.tntp", "w", newline="\n") as f:
        f.write(f"<NUMBER OF ZONES> {zones}\n<TOTAL OD FLOW> {demand.sum():.1f}\n")
        f.write("<END OF METADATA>\n\n\n")
        for i in range(zones):
            f.write(f"Origin \t{i + 1}\n")
            for j in range(zones):
                f.write(f"{j + 1:5d} : {demand[i, j]:8.1f};")
                if j % 5 == 4:
                    f.write("\n")
            f.write("\n\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
