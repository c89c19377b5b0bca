#include "causalsafe/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "causalsafe/parallel.hpp"
#include "causalsafe/rng.hpp"

namespace causalsafe {

bool EpisodeDataset::has_mediators() const {
  return !episodes.empty() && !episodes.front().m.empty();
}

std::size_t EpisodeDataset::num_steps() const {
  std::size_t n = 0;
  for (const Episode& e : episodes) n += e.x.size();
  return n;
}

namespace {

Episode roll_episode(const ConfoundedMdpModel& model,
                     const TabularPolicy& behavioral,
                     const std::optional<MediatorModel>& mediator, StateId x0,
                     std::uint64_t seed) {
  const int H = model.horizon();
  Rng rng(seed);
  Episode ep;
  ep.seed = seed;
  ep.x.reserve(H + 1);
  ep.u.reserve(H + 1);
  if (mediator) ep.m.reserve(H + 1);

  StateId x = x0;
  for (int t = 0; t <= H; ++t) {
    ep.x.push_back(x);
    const LatentId w = rng.sample(model.latent_row(x));
    const ActionIndex u = rng.sample(behavioral.latent_row(x, w));
    ep.u.push_back(u);
    MediatorId m = 0;
    if (mediator) {
      m = rng.sample(mediator->mediator_row(x, u));
      ep.m.push_back(m);
    }
    if (t == H) break;
    x = mediator ? rng.sample(mediator->mediated_row(x, m, w))
                 : rng.sample(model.transition_row(x, u, w));
  }
  return ep;
}

void check_episode(const Episode& e, int horizon) {
  const std::size_t len = static_cast<std::size_t>(horizon) + 1;
  if (e.x.size() != len || e.u.size() != len ||
      (!e.m.empty() && e.m.size() != len) ||
      (!e.k.empty() && e.k.size() != len)) {
    throw FormError("episode sequences must all have length H + 1");
  }
}

}  // namespace

EpisodeDataset generate_offline(const ConfoundedMdpModel& model,
                                const TabularPolicy& behavioral,
                                const std::optional<MediatorModel>& mediator,
                                std::size_t n_episodes, StateId x0,
                                std::uint64_t seed, unsigned threads) {
  model.check_state(x0);
  if (behavioral.kind() != PolicyKind::kLatentAware) {
    throw ConfigError("offline data must be logged with a latent-aware policy");
  }
  EpisodeDataset out;
  out.form = DatasetForm::kRaw;
  out.horizon = model.horizon();
  out.episodes.resize(n_episodes);
  parallel_for(n_episodes, threads, [&](std::size_t i) {
    out.episodes[i] = roll_episode(model, behavioral, mediator, x0,
                                   derive_seed(seed, {i}));
  });
  return out;
}

EpisodeDataset generate_offline(const Environment& env, std::size_t n_episodes,
                                StateId x0, std::uint64_t seed,
                                unsigned threads) {
  return generate_offline(env.model, env.behavioral, env.mediator, n_episodes,
                          x0, seed, threads);
}

EpisodeDataset convert_dataset(const EpisodeDataset& raw,
                               const ConfoundedMdpModel& model) {
  if (raw.form != DatasetForm::kRaw) {
    throw FormError("dataset is already converted");
  }
  if (!raw.episodes.empty() && raw.horizon != model.horizon()) {
    throw FormError("dataset horizon " + std::to_string(raw.horizon) +
                    " does not match model horizon " +
                    std::to_string(model.horizon()));
  }
  const int H = raw.horizon;
  EpisodeDataset out;
  out.form = DatasetForm::kConverted;
  out.horizon = H;
  out.episodes.reserve(raw.episodes.size());
  for (const Episode& e : raw.episodes) {
    check_episode(e, H);
    Episode c;
    c.seed = e.seed;
    c.u = e.u;
    c.m = e.m;
    c.x.resize(H + 1);
    c.k.resize(H + 1);
    c.x[0] = e.x[0];
    c.k[0] = H;
    for (int t = 0; t < H; ++t) {
      c.x[t + 1] = model.safe(c.x[t]) ? e.x[t + 1] : c.x[t];
      c.k[t + 1] = H - t - 1;
    }
    out.episodes.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON lines

void write_jsonl(std::ostream& out, const EpisodeDataset& dataset) {
  for (const Episode& e : dataset.episodes) {
    nlohmann::ordered_json line;
    line["seed"] = e.seed;
    line["x"] = e.x;
    if (dataset.form == DatasetForm::kConverted) line["k"] = e.k;
    line["u"] = e.u;
    if (!e.m.empty()) line["m"] = e.m;
    out << line.dump() << '\n';
  }
  if (!out) throw IoError("failed writing dataset");
}

EpisodeDataset read_jsonl(std::istream& in) {
  EpisodeDataset out;
  std::string text;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Episode e;
    try {
      const auto line = nlohmann::json::parse(text);
      e.seed = line.at("seed").get<std::uint64_t>();
      e.x = line.at("x").get<std::vector<StateId>>();
      e.u = line.at("u").get<std::vector<ActionIndex>>();
      if (line.contains("k")) e.k = line.at("k").get<std::vector<int>>();
      if (line.contains("m")) e.m = line.at("m").get<std::vector<MediatorId>>();
    } catch (const nlohmann::json::exception& ex) {
      throw IoError("dataset line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (e.x.empty()) throw FormError("episode with no states");
    const DatasetForm form =
        e.k.empty() ? DatasetForm::kRaw : DatasetForm::kConverted;
    const int horizon = static_cast<int>(e.x.size()) - 1;
    if (first) {
      out.form = form;
      out.horizon = horizon;
      first = false;
    } else if (form != out.form || horizon != out.horizon) {
      throw FormError("dataset line " + std::to_string(line_no) +
                      ": mixed forms or horizons");
    }
    check_episode(e, horizon);
    out.episodes.push_back(std::move(e));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path,
                 const EpisodeDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_jsonl(out, dataset);
}

EpisodeDataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_jsonl(in);
}

}  // namespace causalsafe
