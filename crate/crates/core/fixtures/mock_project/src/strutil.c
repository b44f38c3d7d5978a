#include <stdlib.h>
#include <string.h>

#include "mock.h"

size_t mk_strlen(const char *s)
{
    size_t n = 0;
    while (s[n] != '\0')
        n++;
    return n;
}

/* In-place reversal. */
void mk_reverse(char *s)
{
    size_t n = mk_strlen(s);
    for (size_t i = 0; i < n / 2; i++) {
        char t = s[i];
        s[i] = s[n - 1 - i];
        s[n - 1 - i] = t;
    }
}

int mk_count_char(const char *s, char c)
{
    int count = 0;
    for (; *s; s++)
        if (*s == c)
            count++;
    return count;
}

char *mk_strdup(const char *s)
{
    size_t n = mk_strlen(s);
    char *p = malloc(n + 1);
    if (!p)
        return NULL;
    memcpy(p, s, n + 1);
    return p;
}

int mk_is_palindrome(const char *s)
{
    size_t n = mk_strlen(s);
    for (size_t i = 0; i < n / 2; i++)
        if (s[i] != s[n - 1 - i])
            return 0;
    return 1;
}

void mk_to_upper(char *s)
{
    for (; *s; s++)
        if (*s >= 'a' && *s <= 'z')
            *s = (char)(*s - 'a' + 'A');
}

/* Returns a new string "a<sep>b"; caller frees. */
char *mk_join(const char *a, const char *b, char sep)
{
    size_t la = mk_strlen(a), lb = mk_strlen(b);
    char *out = malloc(la + lb + 2);
    if (!out)
        return NULL;
    memcpy(out, a, la);
    out[la] = sep;
    memcpy(out + la + 1, b, lb + 1);
    return out;
}

int mk_starts_with(const char *s, const char *prefix)
{
    while (*prefix) {
        if (*s != *prefix)
            return 0;
        s++;
        prefix++;
    }
    return 1;
}
