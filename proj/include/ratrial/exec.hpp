#pragma once

namespace ratrial {

/// Execution mode for the stage kernels. `serial` runs the plain reference
/// loops; `parallel` runs the OpenMP versions. Both produce bitwise
/// identical results for any thread count.
enum class Exec { serial, parallel };

}  // namespace ratrial
