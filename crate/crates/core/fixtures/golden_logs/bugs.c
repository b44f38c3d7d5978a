/* One defect per case; `bugs NAME` runs bug_NAME through dispatch(). */
#include <stdbool.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int table[4] = {1, 2, 3, 4};
volatile int sink;

static void bug_heap_read(void)
{
    int *p = malloc(4 * sizeof *p);
    sink = p[4];
    free(p);
}

static void bug_heap_write(void)
{
    char *p = malloc(10);
    p[10] = 'x';
    free(p);
}

static void bug_stack_read(void)
{
    volatile int a[3] = {0};
    int i = 3;
    sink = a[i];
}

static void bug_global_read(void)
{
    int *volatile t = table;
    sink = t[4];
}

static void bug_uaf_read(void)
{
    int *p = malloc(sizeof *p);
    free(p);
    sink = *p;
}

static void bug_uaf_write(void)
{
    char *p = malloc(8);
    free(p);
    p[2] = 'y';
}

static void bug_double_free(void)
{
    void *p = malloc(16);
    free(p);
    free(p);
}

static int *escape(void)
{
    int local = 5;
    int *volatile p = &local;
    return p;
}

static void bug_use_after_return(void)
{
    int *p = escape();
    sink = *p;
}

static void bug_use_after_scope(void)
{
    int *volatile p;
    {
        int x = 3;
        p = &x;
    }
    sink = *p;
}

static void bug_wild_write(void)
{
    int *volatile p = (int *)0x10;
    *p = 1;
}

static int recurse(int n)
{
    volatile char pad[256];
    pad[0] = (char)n;
    return recurse(n + 1) + pad[0];
}

static void bug_stack_overflow(void)
{
    sink = recurse(0);
}

static void *keep;

static void bug_leak_direct(void)
{
    keep = malloc(64);
    keep = NULL;
}

struct node {
    struct node *next;
    char payload[24];
};

static void bug_leak_indirect(void)
{
    struct node *head = malloc(sizeof *head);
    head->next = malloc(sizeof *head);
    head->next->next = NULL;
    keep = head;
    keep = NULL;
}

static void bug_signed_overflow(void)
{
    volatile int big = 2147483647;
    sink = big + 1;
}

static void bug_shift_exponent(void)
{
    volatile int s = 40;
    sink = 1 << s;
}

static void bug_div_zero(void)
{
    volatile int z = 0;
    sink = 10 / z;
}

static void bug_misaligned(void)
{
    char buf[16] = {0};
    int *p = (int *)(buf + 1);
    sink = *p;
}

static void bug_bounds(void)
{
    int a[4] = {0};
    volatile int i = 4;
    sink = a[i];
}

static void bug_bad_free(void)
{
    int x = 0;
    int *volatile p = &x;
    free(p);
}

static void bug_memcpy_overlap(void)
{
    char buf[32] = "abcdefghijklmnopqrstuvwxyz";
    char *volatile dst = buf + 4;
    memcpy(dst, buf, 16);
}

static void bug_invalid_bool(void)
{
    volatile char raw = 5;
    bool b;
    memcpy(&b, (const char *)&raw, 1);
    sink = b ? 1 : 0;
}

static void bug_overflow_then_leak(void)
{
    char *p = malloc(8);
    volatile int m = 8;
    sink = p[m];
}

static void bug_clean(void)
{
    sink = 1;
}

static const struct {
    const char *name;
    void (*fn)(void);
} cases[] = {
    {"heap_read", bug_heap_read},
    {"heap_write", bug_heap_write},
    {"stack_read", bug_stack_read},
    {"global_read", bug_global_read},
    {"uaf_read", bug_uaf_read},
    {"uaf_write", bug_uaf_write},
    {"double_free", bug_double_free},
    {"use_after_return", bug_use_after_return},
    {"use_after_scope", bug_use_after_scope},
    {"wild_write", bug_wild_write},
    {"stack_overflow", bug_stack_overflow},
    {"leak_direct", bug_leak_direct},
    {"leak_indirect", bug_leak_indirect},
    {"signed_overflow", bug_signed_overflow},
    {"shift_exponent", bug_shift_exponent},
    {"div_zero", bug_div_zero},
    {"misaligned", bug_misaligned},
    {"bounds", bug_bounds},
    {"bad_free", bug_bad_free},
    {"memcpy_overlap", bug_memcpy_overlap},
    {"invalid_bool", bug_invalid_bool},
    {"overflow_then_leak", bug_overflow_then_leak},
    {"clean", bug_clean},
};

static __attribute__((noinline)) void dispatch(const char *name)
{
    for (size_t i = 0; i < sizeof cases / sizeof cases[0]; i++)
        if (strcmp(cases[i].name, name) == 0) {
            cases[i].fn();
            return;
        }
    fprintf(stderr, "unknown case %s\n", name);
    exit(2);
}

int main(int argc, char **argv)
{
    if (argc == 2)
        dispatch(argv[1]);
    return 0;
}
