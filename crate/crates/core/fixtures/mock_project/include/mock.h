#ifndef MOCK_H
#define MOCK_H

#include <stddef.h>

#define MK_VERSION_MAJOR 1
#define MK_VERSION_MINOR 4

typedef struct mk_vec {
    int *data;
    size_t len;
    size_t cap;
} mk_vec;

/* strutil.c */
size_t mk_strlen(const char *s);
void mk_reverse(char *s);
int mk_count_char(const char *s, char c);
char *mk_strdup(const char *s);
int mk_is_palindrome(const char *s);
void mk_to_upper(char *s);
char *mk_join(const char *a, const char *b, char sep);
int mk_starts_with(const char *s, const char *prefix);

/* vec.c */
mk_vec *mk_vec_new(size_t cap);
int mk_vec_push(mk_vec *v, int x);
int mk_vec_get(const mk_vec *v, size_t i);
long mk_vec_sum(const mk_vec *v);
int mk_vec_max(const mk_vec *v);
void mk_vec_free(mk_vec *v);
void mk_vec_sort(mk_vec *v);
size_t mk_vec_count_if_even(const mk_vec *v);
int mk_bsearch(const int *a, size_t n, int key);

/* hash.c */
unsigned mk_checksum(const char *s);
unsigned mk_fnv1a(const char *s);
int mk_hash_mix(int a, int b);
unsigned mk_crc8(const unsigned char *p, size_t n);

/* mathx.c */
int mk_gcd(int a, int b);
int mk_lcm(int a, int b);
long mk_factorial(int n);
int mk_fib(int n);
int mk_is_prime(int n);
int mk_clamp(int x, int lo, int hi);
int mk_ipow(int base, unsigned exp);
int mk_digit_sum(int n);
unsigned mk_popcount(unsigned x);
long mk_zero();
void mk_noop(void);

/* parse.c */
int mk_parse_int(const char *s, int *out);
int mk_split_count(const char *s, char sep);
int mk_parse_csv_sum(const char *s);
char *mk_trim(char *s);
int mk_atoi_safe(const char *s);
int mk_roman_value(char c);

/* version.c */
int mk_version_major(void);
const char *mk_version_string(void);
int mk_feature_enabled(const char *name);
void mk_table_init(int *t, size_t n);

#endif
