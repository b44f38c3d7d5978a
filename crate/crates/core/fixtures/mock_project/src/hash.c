#include "mock.h"

unsigned mk_checksum(const char *s)
{
    unsigned sum = 7;
    for (; *s; s++)
        sum = sum * 31u + (unsigned char)*s;
    return sum;
}

unsigned mk_fnv1a(const char *s)
{
    unsigned h = 2166136261u;
    for (; *s; s++) {
        h ^= (unsigned char)*s;
        h *= 16777619u;
    }
    return h;
}

int mk_hash_mix(int a, int b)
{
    unsigned x = (unsigned)a * 31u + (unsigned)b;
    return (int)(x ^ (x >> 15));
}

unsigned mk_crc8(const unsigned char *p, size_t n)
{
    unsigned crc = 0;
    for (size_t i = 0; i < n; i++) {
        crc ^= p[i];
        for (int k = 0; k < 8; k++)
            crc = (crc & 0x80) ? ((crc << 1) ^ 0x07) & 0xff : (crc << 1) & 0xff;
    }
    return crc;
}
