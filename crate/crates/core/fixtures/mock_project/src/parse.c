#include <stdlib.h>
#include <string.h>

#include "mock.h"

/* Parses an optionally signed decimal; returns 0 on success. */
int mk_parse_int(const char *s, int *out)
{
    int sign = 1, v = 0;
    if (*s == '-' || *s == '+') {
        if (*s == '-')
            sign = -1;
        s++;
    }
    if (*s < '0' || *s > '9')
        return -1;
    while (*s >= '0' && *s <= '9')
        v = v * 10 + (*s++ - '0');
    *out = sign * v;
    return *s ? -1 : 0;
}

int mk_split_count(const char *s, char sep)
{
    int fields = 1;
    for (; *s; s++)
        if (*s == sep)
            fields++;
    return fields;
}

int mk_parse_csv_sum(const char *s)
{
    int total = 0, cur = 0, sign = 1;
    for (;; s++) {
        if (*s == '-') {
            sign = -1;
        } else if (*s >= '0' && *s <= '9') {
            cur = cur * 10 + (*s - '0');
        } else {
            total += sign * cur;
            cur = 0;
            sign = 1;
            if (!*s)
                break;
        }
    }
    return total;
}

char *mk_trim(char *s)
{
    while (*s == ' ' || *s == '\t')
        s++;
    size_t n = strlen(s);
    while (n > 0 && (s[n - 1] == ' ' || s[n - 1] == '\t' || s[n - 1] == '\n'))
        s[--n] = '\0';
    return s;
}

int mk_atoi_safe(const char *s)
{
    int v;
    if (!s || mk_parse_int(s, &v) != 0)
        return 0;
    return v;
}

static const int roman_values[7] = {1, 5, 10, 50, 100, 500, 1000};

int mk_roman_value(char c)
{
    const char *letters = "IVXLCDM";
    const char *p = strchr(letters, c);
    if (!p || !c)
        return 0;
    return roman_values[p - letters];
}
