/* cc verify.c -I../include ../../../target/release/libfieldtk_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "fieldtk.h"

int main(int argc, char **argv) {
  if (argc < 3) {
    fprintf(stderr, "usage: %s MODEL SUITE\n", argv[0]);
    return 2;
  }
  FtkModel *m = NULL;
  if (ftk_model_load(argv[1], &m) != FTK_STATUS_OK) {
    fprintf(stderr, "%s\n", ftk_last_error());
    return 2;
  }
  FtkReport *r = NULL;
  FtkStatus s = ftk_verify(m, argv[2], NULL, &r);
  if (s != FTK_STATUS_OK) {
    fprintf(stderr, "status %d: %s\n", (int)s, ftk_last_error());
    ftk_model_free(m);
    return 1;
  }
  printf("%s\n", ftk_report_json(r));
  int ok = ftk_report_passed(r);
  ftk_report_free(r);
  ftk_model_free(m);
  return ok ? 0 : 1;
}
