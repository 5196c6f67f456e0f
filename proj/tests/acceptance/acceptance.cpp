// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
int main(int, char**) { std::puts("placeholder"); return 1; }
