"""Fourier checks behind the SGD hardness construction.

Runs every numeric check and prints one line each. The character-sum
bound holds for the characters of order 10 and fails for omega = 5,
where chi_5 only takes the values +-1 and the cross terms no longer
cancel. Small counterexample at the end.

    python demos/character_sums.py
"""

from collections import Counter

from diligent.verify import check_gamma_bound, verify_all

records = verify_all(seed=0)
per = Counter((r.lemma, r.passed) for r in records)
for lemma in dict.fromkeys(r.lemma for r in records):
    print(f"{lemma:24s} pass {per[(lemma, True)]:3d}  fail {per[(lemma, False)]:3d}")

for omega in (1, 3, 5):
    r = check_gamma_bound((1, 0), (0, 1), 2, omega)
    print(f"swap vs identity, m=2, omega={omega}: |Gamma| = {r.exact:.3f}, bound {r.bound:.3f}")
