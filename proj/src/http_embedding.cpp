#include "chatcad/domain.hpp"
#include "chatcad/error.hpp"
#include "http_util.hpp"

namespace chatcad {

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, std::size_t dimension)
    : base_url_(std::move(base_url)), dimension_(dimension) {}

std::vector<double> HttpEmbeddingProvider::fetch(const std::string& kind, const std::string& input) const {
  const auto url = detail::split_url(base_url_);
  auto client = detail::make_client(url.origin, std::chrono::seconds(30));
  const nlohmann::json body = {{"kind", kind}, {"input", input}};
  auto res = client->Post(url.path + "/embed", body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::IoError, "embedding service unreachable at " + base_url_);
  if (res->status == 404) throw Error(ErrorCode::UnknownImage, "embedding service does not know '" + input + "'");
  if (res->status != 200) {
    throw Error(ErrorCode::IoError, "embedding service returned HTTP " + std::to_string(res->status));
  }
  std::vector<double> v;
  try {
    v = nlohmann::json::parse(res->body).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ResponseMalformed, std::string("embedding response: ") + e.what());
  }
  if (v.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, "embedding service returned dimension " + std::to_string(v.size()));
  }
  return v;
}

ImageEmbedding HttpEmbeddingProvider::embed_image(const std::string& image_ref) const {
  return {fetch("image", image_ref), image_ref};
}

std::vector<double> HttpEmbeddingProvider::embed_text(const std::string& key) const { return fetch("text", key); }

}  // namespace chatcad
