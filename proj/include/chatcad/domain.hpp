#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace chatcad {

struct DomainDescriptor {
  std::string id;
  std::string textual_representation;
  std::vector<double> embedding;
};

struct ImageEmbedding {
  std::vector<double> vector;
  std::string source_id;
};

struct Finding {
  std::string disease;
  double prob = 0.0;

  bool operator==(const Finding&) const = default;
};

/// Output of one domain-specific CAD network: per-disease likelihoods and,
/// for networks that emit text directly, a raw report.
struct CadOutput {
  std::string domain_id;
  std::vector<Finding> findings;
  std::optional<std::string> raw_report;

  bool operator==(const CadOutput&) const = default;
};

/// Throws MalformedModelOutput when a prob leaves [0,1] or a label repeats.
void validate(const CadOutput& output);

nlohmann::json to_json(const CadOutput& output);
CadOutput cad_output_from_json(const nlohmann::json& j);

struct DomainScore {
  std::string id;
  double cosine = 0.0;
};

/// Cosine similarity of the image against every descriptor, in registry order.
std::vector<DomainScore> domain_scores(const ImageEmbedding& image,
                                       std::span<const DomainDescriptor> domains);

/// Argmax of cosine(image, descriptor). Equal cosines resolve to the lowest
/// index. Throws EmptyRegistry, DimensionMismatch or ZeroNormVector.
std::string identify_domain(const ImageEmbedding& image,
                            std::span<const DomainDescriptor> domains);

class CadAdapter {
 public:
  virtual ~CadAdapter() = default;
  /// Must be safe to call concurrently.
  [[nodiscard]] virtual CadOutput infer(const std::string& image_ref) const = 0;
  [[nodiscard]] virtual bool has_image(const std::string& image_ref) const = 0;
};

/// Read-only adapter over a precomputed fixture:
/// {"domain": id, "records": {image_id: {"findings": [...], "raw_report": str|null}}}
class FileCadAdapter final : public CadAdapter {
 public:
  FileCadAdapter(std::string domain_id, nlohmann::json records);
  static std::shared_ptr<FileCadAdapter> load(const std::filesystem::path& path);

  [[nodiscard]] CadOutput infer(const std::string& image_ref) const override;
  [[nodiscard]] bool has_image(const std::string& image_ref) const override;
  [[nodiscard]] const std::string& domain_id() const noexcept { return domain_id_; }
  [[nodiscard]] std::vector<std::string> image_ids() const;

 private:
  std::string domain_id_;
  nlohmann::json records_;
};

/// Descriptors and adapters for every known imaging domain. Populated once at
/// startup, then shared read-only.
class DomainRegistry {
 public:
  explicit DomainRegistry(std::size_t dimension) : dimension_(dimension) {}

  void add_domain(DomainDescriptor descriptor);
  void register_adapter(const std::string& domain_id, std::shared_ptr<const CadAdapter> adapter);

  [[nodiscard]] std::shared_ptr<const CadAdapter> dispatch(const std::string& domain_id) const;
  [[nodiscard]] std::string identify(const ImageEmbedding& image) const;

  /// Adapter ids in registration order.
  [[nodiscard]] std::vector<std::string> adapter_ids() const;
  [[nodiscard]] std::span<const DomainDescriptor> domains() const noexcept { return domains_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
  [[nodiscard]] bool empty() const noexcept { return domains_.empty(); }

 private:
  std::size_t dimension_;
  std::vector<DomainDescriptor> domains_;
  std::vector<std::pair<std::string, std::shared_ptr<const CadAdapter>>> adapters_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  [[nodiscard]] virtual ImageEmbedding embed_image(const std::string& image_ref) const = 0;
  [[nodiscard]] virtual std::vector<double> embed_text(const std::string& key) const = 0;
  [[nodiscard]] virtual std::size_t dimension() const = 0;
};

/// Precomputed vectors keyed by id: {"dimension": E, "vectors": {id: [floats]}}.
/// Text keys are looked up verbatim in the same table.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  FileEmbeddingProvider(std::size_t dimension, std::map<std::string, std::vector<double>> vectors);
  static std::shared_ptr<FileEmbeddingProvider> load(const std::filesystem::path& path);

  [[nodiscard]] ImageEmbedding embed_image(const std::string& image_ref) const override;
  [[nodiscard]] std::vector<double> embed_text(const std::string& key) const override;
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }

 private:
  std::size_t dimension_;
  std::map<std::string, std::vector<double>> vectors_;
};

/// Remote encoder: POST {base}/embed {"kind": "image"|"text", "input": str}
/// answered by {"embedding": [floats]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string base_url, std::size_t dimension);

  [[nodiscard]] ImageEmbedding embed_image(const std::string& image_ref) const override;
  [[nodiscard]] std::vector<double> embed_text(const std::string& key) const override;
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }

 private:
  [[nodiscard]] std::vector<double> fetch(const std::string& kind, const std::string& input) const;

  std::string base_url_;
  std::size_t dimension_;
};

}  // namespace chatcad
