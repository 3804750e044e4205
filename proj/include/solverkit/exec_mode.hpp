#pragma once

namespace solverkit::exec {

// Process-wide execution mode. Serial mode is the deterministic reference:
// every parallel kernel has a sequential path selected by this switch.
// Initialized from the SOLVERKIT_SERIAL environment variable.
bool serial();
void set_serial(bool on);

int threads();
void set_threads(int n);

}  // namespace solverkit::exec
