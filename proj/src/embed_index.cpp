#include "xr/embed_index.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "xr/errors.hpp"
#include "xr/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "catalog files are little-endian; big-endian hosts are unsupported");

namespace xr {

std::optional<std::size_t> Catalog::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Catalog::rebuild_index() {
  index_.clear();
  index_.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) index_[images[i].id] = i;
}

Catalog build_catalog(const std::vector<ImageHandle>& images, AgentService& service) {
  if (images.empty()) throw InputError("catalog build needs at least one image");
  std::unordered_set<std::string> seen;
  for (const auto& img : images) {
    if (img.id.empty()) throw InputError("image with empty id");
    if (!seen.insert(img.id).second) throw InputError("duplicate image id: " + img.id);
  }

  Catalog catalog;
  catalog.images = images;
  catalog.embedder_id = service.backend().embedder_identity();
  catalog.captions.reserve(images.size());

  std::vector<std::string> failures;
  std::vector<std::vector<float>> image_vecs(images.size());
  std::vector<std::vector<float>> caption_vecs(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    try {
      Caption cap = service.caption(images[i]);
      image_vecs[i] = service.embed_image(images[i]);
      caption_vecs[i] = service.embed_text(cap.text);
      catalog.captions.push_back(std::move(cap));
    } catch (const Error& ex) {
      failures.push_back(images[i].id + ": " + ex.what());
      catalog.captions.push_back(Caption{});
    }
  }
  if (!failures.empty()) {
    std::ostringstream msg;
    msg << failures.size() << " of " << images.size() << " catalog items failed:";
    for (const auto& f : failures) msg << "\n  " << f;
    throw BackendError(msg.str());
  }

  catalog.dim = service.embedding_dim();
  catalog.image_matrix.resize(images.size() * catalog.dim);
  catalog.caption_matrix.resize(images.size() * catalog.dim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::memcpy(catalog.image_matrix.data() + i * catalog.dim, image_vecs[i].data(),
                catalog.dim * sizeof(float));
    std::memcpy(catalog.caption_matrix.data() + i * catalog.dim, caption_vecs[i].data(),
                catalog.dim * sizeof(float));
  }
  catalog.rebuild_index();
  return catalog;
}

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size())
    throw DimensionMismatch("cosine of vectors with dims " + std::to_string(u.size()) + " and " +
                            std::to_string(v.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  if (acc > 1.0) acc = 1.0;
  if (acc < -1.0) acc = -1.0;
  return acc;
}

namespace {

const std::vector<float>& side_matrix(const Catalog& catalog, CatalogSide side) {
  return side == CatalogSide::caption_vectors ? catalog.caption_matrix : catalog.image_matrix;
}

void check_ready(std::span<const float> query, const Catalog& catalog, CatalogSide side) {
  if (catalog.size() == 0) throw StateError("catalog is empty");
  const auto& matrix = side_matrix(catalog, side);
  if (catalog.dim == 0 || matrix.size() != catalog.size() * catalog.dim)
    throw StateError("catalog vectors not built for requested side");
  if (query.size() != catalog.dim)
    throw DimensionMismatch("query dim " + std::to_string(query.size()) + " vs catalog dim " +
                            std::to_string(catalog.dim));
}

}  // namespace

std::vector<float> batch_similarity(std::span<const float> query, const Catalog& catalog,
                                    CatalogSide side) {
  check_ready(query, catalog, side);
  std::vector<float> out(catalog.size());
  kernels::cosine_rows_parallel(side_matrix(catalog, side).data(), catalog.size(), catalog.dim,
                                query.data(), out.data());
  return out;
}

std::vector<float> batch_similarity_serial(std::span<const float> query, const Catalog& catalog,
                                           CatalogSide side) {
  check_ready(query, catalog, side);
  std::vector<float> out(catalog.size());
  kernels::cosine_rows_serial(side_matrix(catalog, side).data(), catalog.size(), catalog.dim,
                              query.data(), out.data());
  return out;
}

// ---------------------------------------------------------------------------
// Persistence. Layout: magic "XRCAT", version u16, dim u32, N u64, embedder
// id string, then per entry: id, uri, caption text, caption source u8, image
// vector, caption vector. Strings are u32-length-prefixed UTF-8; vectors are
// dim little-endian f32.

namespace {

constexpr char kMagic[5] = {'X', 'R', 'C', 'A', 'T'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("truncated catalog file");
  return value;
}

std::string read_string(std::istream& in) {
  auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw FormatError("truncated catalog file");
  return s;
}

}  // namespace

void save_catalog(const Catalog& catalog, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write catalog file: " + path);

  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint16_t>(out, kVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(catalog.dim));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(catalog.size()));
  write_string(out, catalog.embedder_id);

  for (std::size_t i = 0; i < catalog.size(); ++i) {
    write_string(out, catalog.images[i].id);
    write_string(out, catalog.images[i].uri);
    write_string(out, catalog.captions[i].text);
    write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(catalog.captions[i].source));
    out.write(reinterpret_cast<const char*>(catalog.image_matrix.data() + i * catalog.dim),
              static_cast<std::streamsize>(catalog.dim * sizeof(float)));
    out.write(reinterpret_cast<const char*>(catalog.caption_matrix.data() + i * catalog.dim),
              static_cast<std::streamsize>(catalog.dim * sizeof(float)));
  }
  if (!out) throw IoError("write failed for catalog file: " + path);
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open catalog file: " + path);

  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("bad catalog magic in " + path);
  auto version = read_pod<std::uint16_t>(in);
  if (version != kVersion)
    throw FormatError("unsupported catalog version " + std::to_string(version) + " (expected " +
                      std::to_string(kVersion) + ")");

  Catalog catalog;
  catalog.dim = read_pod<std::uint32_t>(in);
  auto n = read_pod<std::uint64_t>(in);
  catalog.embedder_id = read_string(in);

  catalog.images.reserve(n);
  catalog.captions.reserve(n);
  catalog.image_matrix.resize(n * catalog.dim);
  catalog.caption_matrix.resize(n * catalog.dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    ImageHandle img;
    img.id = read_string(in);
    img.uri = read_string(in);
    Caption cap;
    cap.text = read_string(in);
    cap.source = static_cast<CaptionSource>(read_pod<std::uint8_t>(in));
    catalog.images.push_back(std::move(img));
    catalog.captions.push_back(std::move(cap));
    in.read(reinterpret_cast<char*>(catalog.image_matrix.data() + i * catalog.dim),
            static_cast<std::streamsize>(catalog.dim * sizeof(float)));
    in.read(reinterpret_cast<char*>(catalog.caption_matrix.data() + i * catalog.dim),
            static_cast<std::streamsize>(catalog.dim * sizeof(float)));
    if (!in) throw FormatError("truncated catalog file");
  }
  catalog.rebuild_index();
  return catalog;
}

}  // namespace xr
