#include "mock.h"

int mk_gcd(int a, int b)
{
    if (a < 0)
        a = -a;
    if (b < 0)
        b = -b;
    while (b != 0) {
        int t = a % b;
        a = b;
        b = t;
    }
    return a;
}

int mk_lcm(int a, int b)
{
    if (a == 0 || b == 0)
        return 0;
    return a / mk_gcd(a, b) * b;
}

long mk_factorial(int n)
{
    long r = 1;
    for (int i = 2; i <= n; i++)
        r *= i;
    return r;
}

int mk_fib(int n)
{
    int a = 0, b = 1;
    for (int i = 0; i < n; i++) {
        int t = a + b;
        a = b;
        b = t;
    }
    return a;
}

int mk_is_prime(int n)
{
    if (n < 2)
        return 0;
    for (int d = 2; d * d <= n; d++)
        if (n % d == 0)
            return 0;
    return 1;
}

int mk_clamp(int x, int lo, int hi)
{
    if (x < lo)
        return lo;
    if (x > hi)
        return hi;
    return x;
}

int mk_ipow(int base, unsigned exp)
{
    int r = 1;
    while (exp) {
        if (exp & 1u)
            r *= base;
        base *= base;
        exp >>= 1;
    }
    return r;
}

int mk_digit_sum(int n)
{
    int s = 0;
    if (n < 0)
        n = -n;
    while (n > 0) {
        s += n % 10;
        n /= 10;
    }
    return s;
}

unsigned mk_popcount(unsigned x)
{
    unsigned c = 0;
    while (x) {
        c += x & 1u;
        x >>= 1;
    }
    return c;
}

#ifdef MOCK_LEGACY_API
/* Kept for source compatibility with 0.x callers. */
int mk_legacy_scale(int x)
{
    int scaled = x * MK_VERSION_MINOR;
    return scaled / 2;
}
#endif

long mk_zero() { return 0; }

void mk_noop(void) {}
