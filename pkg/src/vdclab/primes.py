"""Deterministic primality testing and nearest-prime search."""

from __future__ import annotations

# Deterministic Miller-Rabin witnesses, valid for n < 3.3e24.
_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    n = int(n)
    if n < 2:
        return False
    for p in _WITNESSES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    n = max(int(n), 2)
    while not is_prime(n):
        n += 1
    return n


def prev_prime(n: int) -> int | None:
    """Largest prime <= n, or None when n < 2."""
    n = int(n)
    while n >= 2:
        if is_prime(n):
            return n
        n -= 1
    return None


def nearest_prime(x: float) -> int:
    """Prime closest to the real number ``x``; ties go to the smaller prime."""
    lo = prev_prime(int(x // 1))
    hi = next_prime(int(-(-x // 1)))
    if lo is None:
        return hi
    return lo if x - lo <= hi - x else hi


def primes_in(lo: int, hi: int) -> list[int]:
    return [p for p in range(max(lo, 2), hi + 1) if is_prime(p)]


def prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out
