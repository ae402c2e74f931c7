/* The public header must compile as C. */
#include <stdio.h>

#include "aqsgee/aqsgee.h"

int main(void) {
  double v = 0.0;
  if (aqsgee_link_eval("probit", 0, 0.0, &v) != AQSGEE_OK || v != 0.5) {
    fprintf(stderr, "link_eval failed: %s\n", aqsgee_last_error());
    return 1;
  }
  printf("aqsgee %s\n", aqsgee_version());
  return 0;
}
