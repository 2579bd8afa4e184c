#include <stdio.h>
#include <string.h>

#include "bst/bst.h"

int main(void) {
  float dense[8] = {1, 0, 0, 0, 0, 0, 2, 0};
  float back[8];
  bst_bsr* m = NULL;
  bst_bsr_info info;
  if (bst_bsr_encode(dense, 2, 4, 1, 2, &m) != BST_OK) return 1;
  if (bst_bsr_get_info(m, &info) != BST_OK || info.nnzb != 2) return 2;
  if (bst_bsr_decode(m, back, 8) != BST_OK || memcmp(back, dense, sizeof dense) != 0) return 3;
  bst_bsr_free(m);
  if (bst_bsr_encode(dense, 2, 4, 1, 3, &m) != BST_ERR_DIMENSION) return 4;
  printf("%s %s\n", bst_version(), bst_status_name(BST_ERR_DIMENSION));
  return 0;
}
