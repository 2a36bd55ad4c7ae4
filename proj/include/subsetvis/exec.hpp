#pragma once

namespace subsetvis {

// Selects between the OpenMP kernel and the serial reference loop. Both
// produce bit-identical results; the serial path exists for testing and
// benchmarking.
enum class ExecPolicy { serial, parallel };

}  // namespace subsetvis
