#include "xr/kernels.hpp"

#include <cstdint>

namespace xr::kernels {

namespace {

inline float clamped_dot(const float* row, const float* query, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d)
    acc += static_cast<double>(row[d]) * static_cast<double>(query[d]);
  if (acc > 1.0) acc = 1.0;
  if (acc < -1.0) acc = -1.0;
  return static_cast<float>(acc);
}

}  // namespace

void cosine_rows_serial(const float* rows, std::size_t n, std::size_t dim, const float* query,
                        float* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = clamped_dot(rows + i * dim, query, dim);
}

void cosine_rows_parallel(const float* rows, std::size_t n, std::size_t dim, const float* query,
                          float* out) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    out[i] = clamped_dot(rows + static_cast<std::size_t>(i) * dim, query, dim);
}

}  // namespace xr::kernels
