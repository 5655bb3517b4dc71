"""Text normalization and the string distances used as match features.

All comparisons operate on Unicode code points. The scalar functions here
are the reference surface: Levenshtein is the classic two-row dynamic
program, and Jaro is computed with exact rational arithmetic so that results
like 1/6 come out as the correctly rounded float. The batch featurization
path in :mod:`placelink.blocking` goes through :mod:`placelink.kernels`
instead; the two agree to within one ulp.
"""

from fractions import Fraction


def normalize_text(s: str) -> str:
    """Lowercase and strip everything that is not a letter or digit.

    Spaces, punctuation, and other separators are removed entirely, so
    "Jl. Boulevard Bintaro" becomes "jlboulevardbintaro". Idempotent.
    """
    return "".join(ch for ch in s.lower() if ch.isalnum())


def levenshtein_raw(a: str, b: str) -> int:
    """Minimum number of insert/delete/substitute edits turning a into b."""
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev = list(range(lb + 1))
    for r in range(1, la + 1):
        cur = [r] + [0] * lb
        ca = a[r - 1]
        for j in range(1, lb + 1):
            sub = prev[j - 1] + (0 if b[j - 1] == ca else 1)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            cur[j] = min(sub, dele, ins)
        prev = cur
    return prev[lb]


def levenshtein_norm(a: str, b: str) -> float:
    """Edit distance normalized by the sum of the string lengths.

    The sum-of-lengths denominator penalizes short strings: ('a', 'b') is 0.5
    while a one-substitution pair of long strings scores near zero. Both
    strings empty is defined as 0.
    """
    total = len(a) + len(b)
    if total == 0:
        return 0.0
    return levenshtein_raw(a, b) / total


def _jaro_counts(a: str, b: str) -> tuple[int, int]:
    """Match count c and raw transposition count t.

    Characters match when equal and within max(0, floor(max(|a|,|b|)/2) - 1)
    positions of each other; t counts matched positions whose characters
    disagree once both match sequences are laid side by side.
    """
    la, lb = len(a), len(b)
    window = max(la, lb) // 2 - 1
    if window < 0:
        window = 0
    b_taken = [False] * lb
    a_match = [False] * la
    c = 0
    for i in range(la):
        lo = max(0, i - window)
        hi = min(lb, i + window + 1)
        for j in range(lo, hi):
            if not b_taken[j] and b[j] == a[i]:
                b_taken[j] = True
                a_match[i] = True
                c += 1
                break
    if c == 0:
        return 0, 0
    t = 0
    j = 0
    for i in range(la):
        if a_match[i]:
            while not b_taken[j]:
                j += 1
            if a[i] != b[j]:
                t += 1
            j += 1
    return c, t


def _jaro_fraction(a: str, b: str) -> Fraction:
    la, lb = len(a), len(b)
    if la == 0 and lb == 0:
        return Fraction(1)
    c, t = _jaro_counts(a, b)
    if c == 0:
        return Fraction(0)
    # (c/|a| + c/|b| + (c - t/2)/c) / 3, kept rational until the end
    return (Fraction(c, la) + Fraction(c, lb) + Fraction(2 * c - t, 2 * c)) / 3


def jaro_similarity(a: str, b: str) -> float:
    """Windowed character-match similarity in [0, 1]; 1 for equal strings."""
    return float(_jaro_fraction(a, b))


def jaro_distance(a: str, b: str) -> float:
    """1 minus Jaro similarity, favoring pairs that share substrings."""
    return float(1 - _jaro_fraction(a, b))
