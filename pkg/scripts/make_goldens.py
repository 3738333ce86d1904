"""Regenerate fixtures/golden from the fixture models through the CLI.

Usage: python scripts/make_goldens.py [--check]

With --check nothing is written; the script exits 1 if any golden differs.
"""

from __future__ import annotations

import argparse
import io
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from blps.cli import main as cli
from blps.codec import deserialize, serialize

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"
GOLD = FIX / "golden"
BIND = "billing.BFf1->transact(accno,amount,accno1)"
# traceability list of the integrated listing, transliterated label by label
PUBLISHED_TF = ("BF1", "BFr1", "BFr2", "DR1", "CRr1", "DRf1", "CRr1", "DRr1", "DRr2")


def run(*argv: str) -> str:
    out, err = io.StringIO(), io.StringIO()
    code = cli(list(argv), out, err)
    if code != 0:
        raise SystemExit(f"blps {' '.join(argv)} exited {code}: {err.getvalue()}")
    return out.getvalue()


def build() -> dict[str, str]:
    ctr = str(FIX / "epay.ctr")
    files: dict[str, str] = {}
    with tempfile.TemporaryDirectory() as tmp:
        t = Path(tmp)
        for name in ("billing", "transact"):
            run("eval", str(FIX / f"{name}.blm"), "--contract", ctr, "--blps", str(t / f"{name}.blps.xml"))
            files[f"{name}.blps.xml"] = (t / f"{name}.blps.xml").read_text(encoding="utf-8")
            files[f"{name}.flow"] = run("flow", "--abstract", str(FIX / f"{name}.blm"))
            files[f"{name}.concrete.flow"] = run("flow", str(FIX / f"{name}.blm"))
        run("integrate", str(FIX / "billing.blm"), str(FIX / "transact.blm"), "--bind", BIND,
            "--contract", ctr, "--name", "e-billing", "-o", str(t / "e-billing.blps.xml"))
        eb = (t / "e-billing.blps.xml").read_text(encoding="utf-8")
        files["e-billing.blps.xml"] = eb
        files["e-billing.flow"] = run("flow", "--abstract", str(t / "e-billing.blps.xml"))
    doc = deserialize(eb)
    traced = replace(doc, properties=replace(doc.properties, cf=(), af=(), naf=(), tf=PUBLISHED_TF))
    files["e-billing-traceability.blps.xml"] = serialize(traced)
    return files


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args(argv)
    stale = []
    GOLD.mkdir(exist_ok=True)
    for name, text in sorted(build().items()):
        path = GOLD / name
        current = path.read_text(encoding="utf-8") if path.exists() else None
        if current != text:
            stale.append(name)
            if not args.check:
                path.write_text(text, encoding="utf-8", newline="\n")
        print(f"{'stale' if current != text else 'ok':5} {name}")
    return 1 if (args.check and stale) else 0


if __name__ == "__main__":
    sys.exit(main())
