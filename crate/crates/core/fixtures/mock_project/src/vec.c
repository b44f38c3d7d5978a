#include <stdlib.h>

#include "mock.h"

mk_vec *mk_vec_new(size_t cap)
{
    mk_vec *v = malloc(sizeof *v);
    if (!v)
        return NULL;
    v->data = malloc((cap ? cap : 1) * sizeof *v->data);
    v->len = 0;
    v->cap = cap ? cap : 1;
    return v;
}

int mk_vec_push(mk_vec *v, int x)
{
    if (v->len == v->cap) {
        size_t cap = v->cap * 2;
        int *p = realloc(v->data, cap * sizeof *p);
        if (!p)
            return -1;
        v->data = p;
        v->cap = cap;
    }
    v->data[v->len++] = x;
    return 0;
}

int mk_vec_get(const mk_vec *v, size_t i)
{
    if (i >= v->len)
        return 0;
    return v->data[i];
}

long mk_vec_sum(const mk_vec *v)
{
    long total = 0;
    for (size_t i = 0; i < v->len; i++)
        total += v->data[i];
    return total;
}

int mk_vec_max(const mk_vec *v)
{
    int best = v->len ? v->data[0] : 0;
    for (size_t i = 1; i < v->len; i++)
        if (v->data[i] > best)
            best = v->data[i];
    return best;
}

void mk_vec_free(mk_vec *v)
{
    if (!v)
        return;
    free(v->data);
    free(v);
}

// insertion sort, ascending
void mk_vec_sort(mk_vec *v)
{
    for (size_t i = 1; i < v->len; i++) {
        int x = v->data[i];
        size_t j = i;
        while (j > 0 && v->data[j - 1] > x) {
            v->data[j] = v->data[j - 1];
            j--;
        }
        v->data[j] = x;
    }
}

size_t mk_vec_count_if_even(const mk_vec *v)
{
    size_t n = 0;
    for (size_t i = 0; i < v->len; i++)
        if (v->data[i] % 2 == 0)
            n++;
    return n;
}

/* Index of key in sorted a[0..n), or -1. */
int mk_bsearch(const int *a, size_t n, int key)
{
    size_t lo = 0, hi = n;
    while (lo < hi) {
        size_t mid = lo + (hi - lo) / 2;
        if (a[mid] == key)
            return (int)mid;
        if (a[mid] < key)
            lo = mid + 1;
        else
            hi = mid;
    }
    return -1;
}
