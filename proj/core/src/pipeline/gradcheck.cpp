#include "holofuse/pipeline/gradcheck.hpp"

#include "holofuse/errors.hpp"
#include "holofuse/pipeline/model.hpp"
#include "holofuse/random.hpp"

namespace holofuse::pipeline {

std::vector<ModelGradCheckRow> model_gradcheck(const ModelGradCheckOptions& options) {
  if (options.channels.empty()) throw ConfigError("gradcheck: no subjects");
  ModelConfig mc;
  mc.encoder.levels = 2;
  mc.encoder.widths = {3, 4};
  mc.encoder.output_dim = options.dim;
  mc.encoder.window_samples = 32;
  mc.tcn.blocks = 2;
  mc.tcn.dilations = {1, 2};
  mc.tcn.hidden = 6;
  mc.memory_length = 4;
  mc.basis_seed = options.seed;
  CaModel model(mc);
  Rng rng = make_stream(options.seed, "gradcheck/model");
  model.init(rng);

  struct Toy {
    std::string id;
    std::size_t channels;
    nn::Tensor patches;
    std::vector<std::size_t> ends;
    std::vector<double> labels;
    std::vector<double> weights;
  };
  std::vector<Toy> toys;
  Rng data = make_stream(options.seed, "gradcheck/data");
  const std::size_t patches = mc.memory_length + 2;
  for (std::size_t s = 0; s < options.channels.size(); ++s) {
    Toy t{"toy" + std::to_string(s), options.channels[s], nn::Tensor({patches * options.channels[s], 1, 32}), {}, {}, {}};
    for (std::size_t i = 0; i < t.patches.size(); ++i) t.patches[i] = gaussian(data);
    for (std::size_t e = mc.memory_length - 1; e < patches; ++e) {
      t.ends.push_back(e);
      t.labels.push_back(static_cast<double>(e % 2));
      t.weights.push_back(e % 2 ? 2.0 : 0.5);
    }
    model.add_subject(t.id, t.channels);
    // Move the keys off their evenly spaced start.
    nn::Tensor& raw = model.params().at(CaModel::key_name(t.id)).value;
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += 0.5 * gaussian(data);
    toys.push_back(std::move(t));
  }

  const nn::LossBuilder loss = [&](nn::Graph& g, nn::ParamStore&) {
    std::optional<nn::Var> total;
    for (const Toy& t : toys) {
      const nn::Var logits = model.logits(g, t.patches, t.channels, t.ends, t.id);
      const nn::Var l = nn::weighted_bce_with_logits(logits, t.labels, t.weights);
      total = total ? nn::add(*total, l) : l;
    }
    return *total;
  };

  std::vector<ModelGradCheckRow> rows;
  for (const std::string group : {"encoder", "tcn", "keys"}) {
    nn::GradCheckOptions o;
    o.step = options.step;
    o.max_entries_per_param = options.max_entries_per_param;
    for (const std::string& name : model.params().names()) {
      if (name.rfind(group + "/", 0) == 0) o.names.push_back(name);
    }
    if (o.names.empty()) throw StateError("gradcheck: no parameters under '" + group + "/'");
    rows.push_back({group, nn::check_gradients(model.params(), loss, o)});
  }
  return rows;
}

}  // namespace holofuse::pipeline
