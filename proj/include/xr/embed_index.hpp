#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xr/agents.hpp"
#include "xr/domain.hpp"

namespace xr {

enum class CatalogSide { caption_vectors, image_vectors };

// Candidate catalog: every image's caption plus unit-norm image and caption
// embeddings, stored as row-major matrices in insertion order. Immutable
// after build; similarity output order is always insertion order.
struct Catalog {
  std::vector<ImageHandle> images;
  std::vector<Caption> captions;      // aligned with images
  std::vector<float> image_matrix;    // N x dim
  std::vector<float> caption_matrix;  // N x dim
  std::size_t dim = 0;
  std::string embedder_id;

  std::size_t size() const { return images.size(); }
  std::span<const float> image_vector(std::size_t i) const {
    return {image_matrix.data() + i * dim, dim};
  }
  std::span<const float> caption_vector(std::size_t i) const {
    return {caption_matrix.data() + i * dim, dim};
  }
  std::optional<std::size_t> index_of(const std::string& id) const;

  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Captions and embeds the whole candidate set (the expensive one-time pass).
// Resumable: items already in the service's response cache cost no backend
// calls. Per-item failures are collected and reported together.
Catalog build_catalog(const std::vector<ImageHandle>& images, AgentService& service);

// Dot product of unit vectors, clamped to [-1, 1].
double cosine(std::span<const float> u, std::span<const float> v);

std::vector<float> batch_similarity(std::span<const float> query, const Catalog& catalog,
                                    CatalogSide side);
// Serial reference path, kept for tests and the kernel benchmark.
std::vector<float> batch_similarity_serial(std::span<const float> query, const Catalog& catalog,
                                           CatalogSide side);

void save_catalog(const Catalog& catalog, const std::string& path);
Catalog load_catalog(const std::string& path);

}  // namespace xr
