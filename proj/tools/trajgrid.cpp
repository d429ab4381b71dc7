#include <cstdio>

int main() {
  std::puts("trajgrid: CLI wiring pending");
  return 0;
}
