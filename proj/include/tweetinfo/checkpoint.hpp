#pragma once

// Text checkpoint for a ModelState:
//
//   tweetinfo-bigrucnn-checkpoint 1
//   scalar f64
//   config <key>=<value>              (one line per ModelConfig field)
//   vocab <size> <fnv1a-hex>
//   <token>                           (size lines, index order)
//   adam_step <n>
//   tensor <name> <rank> <dims...>
//   <values separated by single spaces>
//   ...
//   end
//
// Parameter tensors are written as "param.<name>", Adam moments as
// "adam_m.<name>" / "adam_v.<name>". Moments of frozen embeddings are always
// zero and are omitted. Values use the shortest round-trip decimal form, so
// save -> load reproduces every parameter bit for bit and equal states give
// byte-identical files.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "tweetinfo/bigrucnn.hpp"
#include "tweetinfo/errors.hpp"
#include "tweetinfo/io.hpp"

namespace tweetinfo {

inline constexpr std::string_view kCheckpointMagic = "tweetinfo-bigrucnn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

template <class Scalar>
constexpr std::string_view scalar_tag() {
  if constexpr (std::is_same_v<Scalar, float>) {
    return "f32";
  } else {
    static_assert(std::is_same_v<Scalar, double>, "checkpoint supports float and double");
    return "f64";
  }
}

template <class T>
std::string to_text(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("checkpoint: cannot parse " + std::string(what) + " from '" + std::string(s) +
                    "'");
  }
  return v;
}

inline std::vector<std::pair<std::string, std::string>> config_fields(const ModelConfig& c) {
  return {
      {"max_length", to_text(c.max_length)},
      {"embedding_dim", to_text(c.embedding_dim)},
      {"conv_filters", to_text(c.conv_filters)},
      {"conv_kernel", to_text(c.conv_kernel)},
      {"gru_hidden", to_text(c.gru_hidden)},
      {"dropout", to_text(c.dropout)},
      {"learning_rate", to_text(c.learning_rate)},
      {"epochs", to_text(c.epochs)},
      {"batch_size", to_text(c.batch_size)},
      {"seed", to_text(c.seed)},
      {"trainable_embeddings", c.trainable_embeddings ? "true" : "false"},
      {"adam_beta1", to_text(c.adam_beta1)},
      {"adam_beta2", to_text(c.adam_beta2)},
      {"adam_epsilon", to_text(c.adam_epsilon)},
  };
}

/// Applies one "key=value" model setting. Shared with the run-config parser.
inline void set_model_field(ModelConfig& c, std::string_view key, std::string_view value) {
  const auto size = [&](std::size_t& dst) { dst = parse_number<std::size_t>(value, key); };
  const auto real = [&](double& dst) { dst = parse_number<double>(value, key); };
  if (key == "max_length") size(c.max_length);
  else if (key == "embedding_dim") size(c.embedding_dim);
  else if (key == "conv_filters") size(c.conv_filters);
  else if (key == "conv_kernel") size(c.conv_kernel);
  else if (key == "gru_hidden") size(c.gru_hidden);
  else if (key == "dropout") real(c.dropout);
  else if (key == "learning_rate") real(c.learning_rate);
  else if (key == "epochs") size(c.epochs);
  else if (key == "batch_size") size(c.batch_size);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(value, key);
  else if (key == "trainable_embeddings") {
    if (value == "true" || value == "1") c.trainable_embeddings = true;
    else if (value == "false" || value == "0") c.trainable_embeddings = false;
    else throw DataError("trainable_embeddings must be true or false, got '" + std::string(value) + "'");
  }
  else if (key == "adam_beta1") real(c.adam_beta1);
  else if (key == "adam_beta2") real(c.adam_beta2);
  else if (key == "adam_epsilon") real(c.adam_epsilon);
  else throw DataError("unknown model setting '" + std::string(key) + "'");
}

template <class Scalar>
void write_tensor(std::string& out, const std::string& name, const Tensor<Scalar>& t) {
  out += "tensor " + name + " " + std::to_string(t.shape.size());
  for (auto d : t.shape) out += " " + std::to_string(d);
  out += '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ' ';
    out += to_text(t[i]);
  }
  out += '\n';
}

inline bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty()) return true;
  }
  return false;
}

inline std::string expect_line(std::istream& in, std::string_view what) {
  std::string line;
  if (!next_line(in, line)) throw DataError("checkpoint: truncated before " + std::string(what));
  return line;
}

inline std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  for (auto f : io::split_fields(line, ' '))
    if (!f.empty()) out.push_back(f);
  return out;
}

template <class Scalar>
void read_tensor(std::istream& in, const std::string& expected_name, Tensor<Scalar>& t) {
  const auto header = expect_line(in, expected_name);
  const auto w = words(header);
  if (w.size() < 3 || w[0] != "tensor" || w[1] != expected_name) {
    throw DataError("checkpoint: expected tensor '" + expected_name + "', found '" + header + "'");
  }
  const auto rank = parse_number<std::size_t>(w[2], "rank");
  if (w.size() != 3 + rank) throw DataError("checkpoint: bad shape line '" + header + "'");
  std::vector<std::size_t> shape;
  for (std::size_t i = 0; i < rank; ++i) shape.push_back(parse_number<std::size_t>(w[3 + i], "dim"));
  if (shape != t.shape) {
    throw DataError("checkpoint: tensor '" + expected_name + "' has a shape inconsistent with its config");
  }
  const auto body = expect_line(in, expected_name + " values");
  const auto values = words(body);
  if (values.size() != t.size()) {
    throw DataError("checkpoint: tensor '" + expected_name + "' expects " + std::to_string(t.size()) +
                    " values, found " + std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto v = parse_number<Scalar>(values[i], expected_name);
    if (!std::isfinite(v)) throw DataError("checkpoint: non-finite value in '" + expected_name + "'");
    t[i] = v;
  }
}

}  // namespace detail

template <class Scalar>
std::string format_checkpoint(const ModelState<Scalar>& s) {
  std::string out;
  out += std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion) + "\n";
  out += "scalar " + std::string(detail::scalar_tag<Scalar>()) + "\n";
  for (const auto& [k, v] : detail::config_fields(s.config)) out += "config " + k + "=" + v + "\n";

  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(s.vocab.hash()));
  out += "vocab " + std::to_string(s.vocab.size()) + " " + hash + "\n";
  for (const auto& t : s.vocab.tokens()) out += t + "\n";

  out += "adam_step " + std::to_string(s.adam_step) + "\n";
  const auto& names = Parameters<Scalar>::names();
  const auto params = s.params.tensors();
  const auto ms = s.adam_m.tensors();
  const auto vs = s.adam_v.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) detail::write_tensor(out, "param." + names[i], *params[i]);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i == 0 && !s.config.trainable_embeddings) continue;
    detail::write_tensor(out, "adam_m." + names[i], *ms[i]);
    detail::write_tensor(out, "adam_v." + names[i], *vs[i]);
  }
  out += "end\n";
  return out;
}

template <class Scalar>
void save_checkpoint(const ModelState<Scalar>& s, const std::filesystem::path& path) {
  io::write_file(path, format_checkpoint(s));
}

template <class Scalar>
ModelState<Scalar> load_checkpoint(std::istream& in) {
  using detail::expect_line;
  using detail::words;

  std::string line = expect_line(in, "header");
  auto w = words(line);
  if (w.size() != 2 || w[0] != kCheckpointMagic) throw DataError("checkpoint: not a tweetinfo checkpoint");
  if (detail::parse_number<int>(w[1], "version") != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::string(w[1]));
  }
  line = expect_line(in, "scalar tag");
  w = words(line);
  if (w.size() != 2 || w[0] != "scalar" || (w[1] != "f32" && w[1] != "f64")) {
    throw DataError("checkpoint: bad scalar line");
  }

  ModelState<Scalar> s;
  while (true) {
    line = expect_line(in, "vocab");
    if (!line.starts_with("config ")) break;
    const auto kv = std::string_view(line).substr(7);
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw DataError("checkpoint: bad config line '" + line + "'");
    detail::set_model_field(s.config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  s.config.validate();

  w = words(line);
  if (w.size() != 3 || w[0] != "vocab") throw DataError("checkpoint: expected vocab line, found '" + line + "'");
  const auto vocab_size = detail::parse_number<std::size_t>(w[1], "vocab size");
  const auto stored_hash = std::string(w[2]);
  if (vocab_size < 2) throw DataError("checkpoint: vocabulary lacks reserved entries");
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) throw DataError("checkpoint: truncated vocabulary");
    if (i < 2) continue;
    if (s.vocab.add(line) != static_cast<TokenId>(i)) {
      throw DataError("checkpoint: duplicate vocabulary token '" + line + "'");
    }
  }
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(s.vocab.hash()));
  if (stored_hash != hash) throw DataError("checkpoint: vocabulary hash mismatch");

  line = expect_line(in, "adam_step");
  w = words(line);
  if (w.size() != 2 || w[0] != "adam_step") throw DataError("checkpoint: expected adam_step");
  s.adam_step = detail::parse_number<std::uint64_t>(w[1], "adam_step");

  s.params = Parameters<Scalar>::zeros(s.config, s.vocab.size());
  s.adam_m = s.params;
  s.adam_v = s.params;
  const auto& names = Parameters<Scalar>::names();
  auto params = s.params.tensors();
  auto ms = s.adam_m.tensors();
  auto vs = s.adam_v.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) detail::read_tensor(in, "param." + names[i], *params[i]);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i == 0 && !s.config.trainable_embeddings) continue;
    detail::read_tensor(in, "adam_m." + names[i], *ms[i]);
    detail::read_tensor(in, "adam_v." + names[i], *vs[i]);
  }
  if (expect_line(in, "end marker") != "end") throw DataError("checkpoint: missing end marker");
  return s;
}

template <class Scalar>
ModelState<Scalar> load_checkpoint(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return load_checkpoint<Scalar>(in);
}

}  // namespace tweetinfo
