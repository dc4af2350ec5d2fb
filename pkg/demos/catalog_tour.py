"""Walk the model catalog: check parallelism on a small grid and classify the center point."""

import time

from caffine import catalog as cat
from caffine.classify import classify_point
from caffine.geometry import verify_parallel


def main():
    print(f"{'id':<16}{'n':>3}  {'parallel':>10}  {'label':<18}{'case':<12}{'lambda1':>12}  time")
    for entry in cat.CATALOG.values():
        t0 = time.perf_counter()
        chart = entry.build()
        grid = 3 if chart.n <= 5 else 2
        par = verify_parallel(chart, grid, 1e-8)
        rep = classify_point(chart, chart.center)
        flag = "" if rep.label == entry.expected_label else "  <-- expected " + entry.expected_label
        print(
            f"{entry.id:<16}{chart.n:>3}  {par['max_residual']:>10.1e}  {rep.label:<18}"
            f"{rep.case:<12}{rep.lambda1:>12.8f}  {time.perf_counter() - t0:.2f}s{flag}"
        )


if __name__ == "__main__":
    main()
