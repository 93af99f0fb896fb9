#include <cstdio>
#include "stepscore/c_api.h"
int main() { std::puts(ss_version()); return 0; }
