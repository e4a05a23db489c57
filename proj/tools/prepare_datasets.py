#!/usr/bin/env python3
"""Export the bundled benchmark datasets into the plain-text formats read by esncv.

Sources are the copies shipped inside two PyPI packages, so no network access to
the original archives is needed:

  * pydataset  -> R's ``sunspot.month`` (monthly sunspot numbers, 1749-2013)
  * sktime     -> UCI Japanese Vowels (.ts files)

Usage: prepare_datasets.py OUT_DIR
"""
import io
import pathlib
import subprocess
import sys
import tarfile
import tempfile
import zipfile


def fetch(pkg, workdir):
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                    "-d", workdir, pkg], check=True)
    return next(pathlib.Path(workdir).glob(pkg.split("=")[0] + "*"))


def export_sunspots(archive, out):
    with tarfile.open(archive) as outer:
        inner = next(m for m in outer.getmembers() if m.name.endswith("resources.tar.gz"))
        with tarfile.open(fileobj=outer.extractfile(inner)) as res:
            member = res.getmember("resources/rdata/csv/datasets/sunspot.month.csv")
            lines = res.extractfile(member).read().decode().splitlines()
    values = [line.split(",")[2] for line in lines[1:] if line.strip()]
    (out / "sunspots_monthly.csv").write_text("sunspots\n" + "\n".join(values) + "\n")
    return len(values)


def export_japanese_vowels(wheel, out):
    counts = {}
    with zipfile.ZipFile(wheel) as z:
        for split, name in (("TRAIN", "ae.train"), ("TEST", "ae.test")):
            text = z.read(f"sktime/datasets/data/JapaneseVowels/JapaneseVowels_{split}.ts").decode()
            rows = text.split("@data", 1)[1].strip().splitlines()
            buf = io.StringIO()
            labels = []
            for row in rows:
                *dims, label = row.split(":")
                series = [d.split(",") for d in dims]
                length = max(len(s) for s in series)
                for t in range(length):
                    buf.write(" ".join(s[t] for s in series if t < len(s)) + "\n")
                buf.write("\n")
                labels.append(int(label))
            if labels != sorted(labels):
                raise SystemExit(f"{split}: utterances are not grouped by speaker")
            (out / "japanese_vowels" / name).write_text(buf.getvalue())
            counts[name] = [labels.count(c) for c in range(1, 10)]
    return counts


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    (out / "japanese_vowels").mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        n = export_sunspots(fetch("pydataset==0.2.0", tmp), out)
        counts = export_japanese_vowels(fetch("sktime==1.2.0", tmp), out)
    print(f"sunspots: {n} samples")
    for name, c in counts.items():
        print(f"{name}: {sum(c)} utterances, per speaker {c}")


if __name__ == "__main__":
    main()
