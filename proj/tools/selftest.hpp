#pragma once

// Fast end-to-end sanity battery for installed binaries: re-derives a frozen
// oracle value per module and checks the load-bearing invariants (reward
// telescoping, gradient correctness, permutation invariance, bit-exact
// checkpointing and training). Prints one PASS/FAIL line per check and
// returns the number of failures.
int run_selftest();
