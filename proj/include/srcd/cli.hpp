#pragma once

namespace srcd::cli {

/// Routes to augment | glcm | graph | gsr-dump | demo | gradcheck.
/// Returns 0 on success, 1 on domain errors, 2 on usage errors.
int dispatch(int argc, const char* const* argv);

}  // namespace srcd::cli
