"""Recompute per-class F from the shipped reference confusion matrices and print them beside the reference table."""

from zsl_pose.classify import DAP, NN_AI, NN_NAIVE, NN_RANDOM_AI
from zsl_pose.evaluate import FIXTURE_DIR, FIXTURES, REFERENCE_FILE, prf, read_confusion_csv, read_reference


def main():
    reference = read_reference(FIXTURE_DIR / REFERENCE_FILE)
    reports = {method: prf(read_confusion_csv(FIXTURE_DIR / name)[0]) for name, method, _, _ in FIXTURES}
    order = [DAP, NN_NAIVE, NN_RANDOM_AI, NN_AI]
    labels = reports[NN_AI].labels
    print(f"{'pose':18s}" + "".join(f"{m:>22s}" for m in order))
    for c in labels + ["avg."]:
        cells = []
        for m in order:
            got = reports[m].macro_f if c == "avg." else reports[m].per_class()[c]
            cells.append(f"{got:.4f} ({got - reference[m][c]:+.1e})")
        print(f"{c:18s}" + "".join(f"{x:>22s}" for x in cells))


if __name__ == "__main__":
    main()
