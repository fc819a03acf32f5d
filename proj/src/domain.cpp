#include "chatcad/domain.hpp"

#include <fstream>
#include <set>

#include "chatcad/error.hpp"
#include "chatcad/vec.hpp"

namespace chatcad {

void validate(const CadOutput& output) {
  std::set<std::string> seen;
  for (const auto& f : output.findings) {
    if (!(f.prob >= 0.0 && f.prob <= 1.0)) {
      throw Error(ErrorCode::MalformedModelOutput,
                  "probability " + std::to_string(f.prob) + " for '" + f.disease + "' outside [0,1]");
    }
    if (!seen.insert(f.disease).second) {
      throw Error(ErrorCode::MalformedModelOutput, "duplicate disease label '" + f.disease + "'");
    }
  }
}

nlohmann::json to_json(const CadOutput& output) {
  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : output.findings) findings.push_back({{"disease", f.disease}, {"prob", f.prob}});
  return {{"domain_id", output.domain_id},
          {"findings", findings},
          {"raw_report", output.raw_report ? nlohmann::json(*output.raw_report) : nlohmann::json()}};
}

CadOutput cad_output_from_json(const nlohmann::json& j) {
  CadOutput out;
  out.domain_id = j.at("domain_id").get<std::string>();
  for (const auto& f : j.at("findings")) {
    out.findings.push_back({f.at("disease").get<std::string>(), f.at("prob").get<double>()});
  }
  if (j.contains("raw_report") && !j["raw_report"].is_null()) out.raw_report = j["raw_report"].get<std::string>();
  return out;
}

std::vector<DomainScore> domain_scores(const ImageEmbedding& image,
                                       std::span<const DomainDescriptor> domains) {
  if (domains.empty()) throw Error(ErrorCode::EmptyRegistry, "no domains registered");
  const double image_norm = norm2(image.vector);
  if (!(image_norm > 0.0)) {
    throw Error(ErrorCode::ZeroNormVector, "image embedding '" + image.source_id + "' has zero norm");
  }
  std::vector<DomainScore> scores;
  scores.reserve(domains.size());
  for (const auto& d : domains) {
    if (d.embedding.size() != image.vector.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "domain '" + d.id + "' has dimension " + std::to_string(d.embedding.size()) +
                      ", image has " + std::to_string(image.vector.size()));
    }
    const double n = norm2(d.embedding);
    if (!(n > 0.0)) throw Error(ErrorCode::ZeroNormVector, "domain '" + d.id + "' has zero norm");
    scores.push_back({d.id, dot(image.vector, d.embedding) / (image_norm * n)});
  }
  return scores;
}

std::string identify_domain(const ImageEmbedding& image, std::span<const DomainDescriptor> domains) {
  const auto scores = domain_scores(image, domains);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].cosine > scores[best].cosine) best = i;
  }
  return scores[best].id;
}

// ---------------------------------------------------------------------------

FileCadAdapter::FileCadAdapter(std::string domain_id, nlohmann::json records)
    : domain_id_(std::move(domain_id)), records_(std::move(records)) {
  if (!records_.is_object()) {
    throw Error(ErrorCode::MalformedModelOutput, "records of domain '" + domain_id_ + "' must be an object");
  }
}

std::shared_ptr<FileCadAdapter> FileCadAdapter::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open CAD fixture " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    return std::make_shared<FileCadAdapter>(doc.at("domain").get<std::string>(), doc.at("records"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedModelOutput, path.string() + ": " + e.what());
  }
}

bool FileCadAdapter::has_image(const std::string& image_ref) const { return records_.contains(image_ref); }

std::vector<std::string> FileCadAdapter::image_ids() const {
  std::vector<std::string> ids;
  for (const auto& [k, _] : records_.items()) ids.push_back(k);
  return ids;
}

CadOutput FileCadAdapter::infer(const std::string& image_ref) const {
  const auto it = records_.find(image_ref);
  if (it == records_.end()) {
    throw Error(ErrorCode::UnknownImage, "image '" + image_ref + "' unknown to domain '" + domain_id_ + "'");
  }
  CadOutput out;
  out.domain_id = domain_id_;
  try {
    for (const auto& f : it->at("findings")) {
      out.findings.push_back({f.at("disease").get<std::string>(), f.at("prob").get<double>()});
    }
    if (it->contains("raw_report") && !(*it)["raw_report"].is_null()) {
      out.raw_report = (*it)["raw_report"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedModelOutput, "record '" + image_ref + "': " + e.what());
  }
  validate(out);
  return out;
}

// ---------------------------------------------------------------------------

void DomainRegistry::add_domain(DomainDescriptor descriptor) {
  for (const auto& d : domains_) {
    if (d.id == descriptor.id) throw Error(ErrorCode::DuplicateDomain, "domain '" + d.id + "' already present");
  }
  if (descriptor.embedding.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch,
                "domain '" + descriptor.id + "' has dimension " + std::to_string(descriptor.embedding.size()) +
                    ", registry expects " + std::to_string(dimension_));
  }
  if (!(norm2(descriptor.embedding) > 0.0)) {
    throw Error(ErrorCode::ZeroNormVector, "domain '" + descriptor.id + "' has zero norm");
  }
  domains_.push_back(std::move(descriptor));
}

void DomainRegistry::register_adapter(const std::string& domain_id, std::shared_ptr<const CadAdapter> adapter) {
  for (const auto& [id, _] : adapters_) {
    if (id == domain_id) throw Error(ErrorCode::DuplicateDomain, "adapter for '" + domain_id + "' already registered");
  }
  adapters_.emplace_back(domain_id, std::move(adapter));
}

std::shared_ptr<const CadAdapter> DomainRegistry::dispatch(const std::string& domain_id) const {
  for (const auto& [id, adapter] : adapters_) {
    if (id == domain_id) return adapter;
  }
  throw Error(ErrorCode::UnknownDomain, "no adapter registered for '" + domain_id + "'");
}

std::string DomainRegistry::identify(const ImageEmbedding& image) const {
  if (image.vector.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, "image '" + image.source_id + "' has dimension " +
                                                  std::to_string(image.vector.size()));
  }
  return identify_domain(image, domains_);
}

std::vector<std::string> DomainRegistry::adapter_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : adapters_) ids.push_back(id);
  return ids;
}

// ---------------------------------------------------------------------------

FileEmbeddingProvider::FileEmbeddingProvider(std::size_t dimension,
                                             std::map<std::string, std::vector<double>> vectors)
    : dimension_(dimension), vectors_(std::move(vectors)) {
  for (const auto& [id, v] : vectors_) {
    if (v.size() != dimension_) {
      throw Error(ErrorCode::DimensionMismatch, "embedding '" + id + "' has dimension " + std::to_string(v.size()));
    }
  }
}

std::shared_ptr<FileEmbeddingProvider> FileEmbeddingProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open embedding fixture " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    return std::make_shared<FileEmbeddingProvider>(
        doc.at("dimension").get<std::size_t>(),
        doc.at("vectors").get<std::map<std::string, std::vector<double>>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

ImageEmbedding FileEmbeddingProvider::embed_image(const std::string& image_ref) const {
  const auto it = vectors_.find(image_ref);
  if (it == vectors_.end()) throw Error(ErrorCode::UnknownImage, "no embedding for image '" + image_ref + "'");
  return {it->second, image_ref};
}

std::vector<double> FileEmbeddingProvider::embed_text(const std::string& key) const {
  const auto it = vectors_.find(key);
  if (it == vectors_.end()) throw Error(ErrorCode::NotFound, "no embedding for text key '" + key + "'");
  return it->second;
}

}  // namespace chatcad
