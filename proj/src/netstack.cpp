#include "mfac/netstack.hpp"

#include <fstream>
#include <json.hpp>

#include "mfac/core.hpp"
#include "mfac/rng.hpp"

namespace mfac {

using nlohmann::json;

NetStack::NetStack(const NetDims& dims) : dims_(dims) {
  require(dims.steps > 0, "netstack: need at least one time step");
  require(dims.state_dim > 0 && dims.control_dim > 0 && dims.score_dim > 0 && dims.hidden > 0,
          "netstack: dimensions must be positive");
  actor.assign(dims.steps, Mlp(dims.state_dim, dims.hidden, dims.control_dim));
  grad_v.assign(dims.steps, Mlp(dims.state_dim, dims.hidden, dims.state_dim));
  score.assign(dims.steps, Mlp(dims.score_dim, dims.hidden, dims.score_dim));
  v0 = Mlp(dims.state_dim, dims.hidden, 1);
  actor_opt.assign(dims.steps, AdamState(actor[0].param_count()));
  grad_v_opt.assign(dims.steps, AdamState(grad_v[0].param_count()));
  score_opt.assign(dims.steps, AdamState(score[0].param_count()));
  v0_opt = AdamState(v0.param_count());
}

void NetStack::initialize(std::uint64_t seed) {
  const StreamKey key{seed, Stream::kWeights};
  for (std::size_t t = 0; t < dims_.steps; ++t) {
    auto r_actor = make_stream(key.with(0, t));
    mfac::initialize(actor[t], r_actor, SkipInit::kIdentity);
    auto r_grad = make_stream(key.with(1, t));
    mfac::initialize(grad_v[t], r_grad, SkipInit::kIdentity);
    auto r_score = make_stream(key.with(2, t));
    mfac::initialize(score[t], r_score, SkipInit::kNegativeIdentity);
  }
  auto r_v0 = make_stream(key.with(3));
  mfac::initialize(v0, r_v0, SkipInit::kIdentity);
  for (auto& s : actor_opt) s = AdamState(actor[0].param_count());
  for (auto& s : grad_v_opt) s = AdamState(grad_v[0].param_count());
  for (auto& s : score_opt) s = AdamState(score[0].param_count());
  v0_opt = AdamState(v0.param_count());
}

namespace {

json matrix(const std::vector<double>& p, std::size_t offset, std::size_t rows,
            std::size_t cols) {
  json m = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < cols; ++c) row.push_back(p[offset + r * cols + c]);
    m.push_back(std::move(row));
  }
  return m;
}

json net_to_json(const Mlp& net) {
  const auto& p = net.params();
  const std::size_t in = net.in_dim(), h = net.hidden_dim(), out = net.out_dim();
  return json{
      {"in", in},
      {"hidden", h},
      {"out", out},
      {"W1", matrix(p, net.w1_offset(), h, in)},
      {"b1", std::vector<double>(p.begin() + static_cast<long>(net.b1_offset()),
                                 p.begin() + static_cast<long>(net.w2_offset()))},
      {"W2", matrix(p, net.w2_offset(), out, h)},
      {"b2", std::vector<double>(p.begin() + static_cast<long>(net.b2_offset()),
                                 p.begin() + static_cast<long>(net.wskip_offset()))},
      {"Wskip", matrix(p, net.wskip_offset(), out, in)},
  };
}

void read_matrix(const json& j, std::vector<double>& p, std::size_t offset, std::size_t rows,
                 std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows)
    throw std::invalid_argument(std::string("checkpoint: bad shape for ") + what);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != cols)
      throw std::invalid_argument(std::string("checkpoint: bad shape for ") + what);
    for (std::size_t c = 0; c < cols; ++c) p[offset + r * cols + c] = row[c].get<double>();
  }
}

Mlp net_from_json(const json& j, std::size_t in, std::size_t hidden, std::size_t out) {
  if (j.at("in").get<std::size_t>() != in || j.at("hidden").get<std::size_t>() != hidden ||
      j.at("out").get<std::size_t>() != out)
    throw std::invalid_argument("checkpoint: network dimensions disagree with header");
  Mlp net(in, hidden, out);
  auto& p = net.params();
  read_matrix(j.at("W1"), p, net.w1_offset(), hidden, in, "W1");
  read_matrix(json::array({j.at("b1")}), p, net.b1_offset(), 1, hidden, "b1");
  read_matrix(j.at("W2"), p, net.w2_offset(), out, hidden, "W2");
  read_matrix(json::array({j.at("b2")}), p, net.b2_offset(), 1, out, "b2");
  read_matrix(j.at("Wskip"), p, net.wskip_offset(), out, in, "Wskip");
  return net;
}

}  // namespace

void save_checkpoint(const NetStack& stack, const std::string& model_id,
                     const std::filesystem::path& path) {
  const auto& d = stack.dims();
  json doc;
  doc["format"] = "mfac-checkpoint";
  doc["version"] = 1;
  doc["model"] = model_id;
  doc["dims"] = {{"steps", d.steps},
                 {"state_dim", d.state_dim},
                 {"control_dim", d.control_dim},
                 {"score_dim", d.score_dim},
                 {"hidden", d.hidden}};
  json actor = json::array(), grad_v = json::array(), score = json::array();
  for (std::size_t t = 0; t < d.steps; ++t) {
    actor.push_back(net_to_json(stack.actor[t]));
    grad_v.push_back(net_to_json(stack.grad_v[t]));
    score.push_back(net_to_json(stack.score[t]));
  }
  doc["actor"] = std::move(actor);
  doc["grad_v"] = std::move(grad_v);
  doc["score"] = std::move(score);
  doc["v0"] = net_to_json(stack.v0);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << doc.dump(1) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("checkpoint: " + std::string(e.what()));
  }
  try {
    if (doc.at("format").get<std::string>() != "mfac-checkpoint")
      throw std::invalid_argument("checkpoint: unrecognized format");
    NetDims d;
    const auto& hd = doc.at("dims");
    d.steps = hd.at("steps").get<std::size_t>();
    d.state_dim = hd.at("state_dim").get<std::size_t>();
    d.control_dim = hd.at("control_dim").get<std::size_t>();
    d.score_dim = hd.at("score_dim").get<std::size_t>();
    d.hidden = hd.at("hidden").get<std::size_t>();
    LoadedCheckpoint out{NetStack(d), doc.at("model").get<std::string>()};
    const auto& actor = doc.at("actor");
    const auto& grad_v = doc.at("grad_v");
    const auto& score = doc.at("score");
    if (actor.size() != d.steps || grad_v.size() != d.steps || score.size() != d.steps)
      throw std::invalid_argument("checkpoint: network count disagrees with header");
    for (std::size_t t = 0; t < d.steps; ++t) {
      out.stack.actor[t] = net_from_json(actor[t], d.state_dim, d.hidden, d.control_dim);
      out.stack.grad_v[t] = net_from_json(grad_v[t], d.state_dim, d.hidden, d.state_dim);
      out.stack.score[t] = net_from_json(score[t], d.score_dim, d.hidden, d.score_dim);
    }
    out.stack.v0 = net_from_json(doc.at("v0"), d.state_dim, d.hidden, 1);
    return out;
  } catch (const json::exception& e) {
    throw std::invalid_argument("checkpoint: " + std::string(e.what()));
  }
}

Policy actor_policy(const std::vector<Mlp>& actor) {
  return [&actor](std::size_t step, std::span<const double> x, std::span<double> alpha) {
    actor[step].forward(x, alpha);
  };
}

}  // namespace mfac
