"""Classify pointwise data built from the Jordan algebras Herm(3, F).

Each tensor is pushed through a random change of coordinates first, so the
classifier only sees (h, K) in a skewed basis.
"""

from caffine import synthetic as syn
from caffine.classify import classify_tensor

NAMES = {0: "R", 1: "C", 3: "H", 7: "O"}


def main():
    for p, field in NAMES.items():
        h, K, eps = syn.jordan_data(p)
        h, K = syn.random_congruence(h, K, seed=p)
        rep = classify_tensor(h, K, eps)
        print(f"Herm(3, {field}): n={h.shape[0]:>2}  {rep.label:<10} {rep.case:<12} lambda1={rep.lambda1:.10f}")

    h, K, eps = syn.calabi_with_point(*syn.jordan_data(1))
    rep = classify_tensor(h, K, eps)
    print(f"Herm(3, C) x point: n={h.shape[0]:>2}  {rep.label}  {rep.case}")


if __name__ == "__main__":
    main()
