#pragma once

#include <cstddef>

namespace xr::kernels {

// Cosine of one query vector against n unit rows of a row-major matrix.
// Accumulation is double, the result is clamped to [-1, 1]. Each output
// element is computed independently, so the parallel variant is bit-identical
// to the serial one for any thread count.
void cosine_rows_serial(const float* rows, std::size_t n, std::size_t dim, const float* query,
                        float* out);
void cosine_rows_parallel(const float* rows, std::size_t n, std::size_t dim, const float* query,
                          float* out);

}  // namespace xr::kernels
