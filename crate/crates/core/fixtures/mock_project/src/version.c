#include <stdio.h>
#include <string.h>

#include "mock.h"

int mk_version_major(void)
{
    return MK_VERSION_MAJOR;
}

const char *mk_version_string(void)
{
    static char buf[32];
    snprintf(buf, sizeof buf, "mock %d.%d", MK_VERSION_MAJOR, MK_VERSION_MINOR);
    return buf;
}

static const char *const features[] = {"vec", "hash", "parse", NULL};

int mk_feature_enabled(const char *name)
{
    for (size_t i = 0; features[i]; i++)
        if (strcmp(features[i], name) == 0)
            return 1;
    return 0;
}

void mk_table_init(int *t, size_t n)
{
    for (size_t i = 0; i < n; i++)
        t[i] = (int)(i * i) % 7;
}
