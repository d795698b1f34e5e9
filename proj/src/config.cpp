#include "eltrack/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "eltrack/errors.hpp"

namespace eltrack {

void ModelConfig::validate() const {
    if (num_trackers < 1) throw ValidationError("N must be >= 1");
    if (memory_length < 1) throw ValidationError("L must be >= 1");
    if (embed_dim < 4 || embed_dim % 4 != 0) throw ValidationError("c must be a positive multiple of 4");
    if (heads < 1 || embed_dim % heads != 0) throw ValidationError("c must be divisible by heads");
    if (points < 1) throw ValidationError("points must be >= 1");
    if (backbone_dim < 1 || backbone_width < 1) throw ValidationError("backbone widths must be positive");
    if (encoder_layers < 0 || decoder_layers < 1) throw ValidationError("bad layer counts");
    if (ffn_mult < 1) throw ValidationError("ffn_mult must be >= 1");
    if (template_size < 16 || template_size % 16 != 0) throw ValidationError("template_size must be a multiple of 16");
    if (search_width < 16 || search_height < 16 || search_width % 16 != 0 || search_height % 16 != 0) {
        throw ValidationError("search size must be a multiple of the stride 16");
    }
}

void LossWeights::validate() const {
    if (cls < 0 || ref < 0 || l1 < 0 || iou < 0 || similarity < 0) {
        throw ValidationError("loss weights must be nonnegative");
    }
    if (focal_gamma < 0 || focal_alpha < 0 || focal_alpha > 1) {
        throw ValidationError("focal parameters out of range");
    }
}

int TrainConfig::sample_length(int epoch) const {
    int length = 2;
    for (const auto& s : curriculum) {
        if (epoch >= s.epoch) {
            length = s.length;
        }
    }
    return length;
}

void TrainConfig::validate() const {
    if (learning_rate <= 0 || grad_clip <= 0 || weight_decay < 0) throw ValidationError("bad optimizer settings");
    if (epochs < 0 || batch_size < 1 || num_sequences < 1 || max_frame_gap < 1) {
        throw ValidationError("bad training schedule");
    }
    if (curriculum.empty()) throw ValidationError("curriculum must have at least one stage");
    for (std::size_t i = 0; i < curriculum.size(); ++i) {
        if (curriculum[i].length < 2) throw ValidationError("sample length must be >= 2");
        if (i > 0 && curriculum[i].epoch <= curriculum[i - 1].epoch) {
            throw ValidationError("curriculum epochs must increase");
        }
    }
}

void RuntimeConfig::validate() const {
    if (alpha_select < 0) throw ValidationError("alpha_select must be nonnegative");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ValidationError("theta must be in [0,1]");
}

void WorldConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (width < 16 || height < 16) throw ValidationError("world image too small");
    if (length < 2) throw ValidationError("sequence length must be >= 2");
    if (!prob(occlusion_prob) || !prob(out_of_view_prob)) throw ValidationError("probabilities must be in [0,1]");
    if (target_min_size <= 0 || target_max_size < target_min_size) throw ValidationError("bad target size range");
    if (target_max_size >= width || target_max_size >= height) {
        throw ValidationError("target larger than frame");
    }
    if (absent_min < 1 || absent_max < absent_min) throw ValidationError("bad absence interval");
    if (distractors < 0) throw ValidationError("distractor count must be >= 0");
    if (speed_min < 0 || speed_max < speed_min) throw ValidationError("bad speed range");
    if (scripted_event_frame >= 0 &&
        (scripted_event_frame < 1 || scripted_event_length < 1 ||
         scripted_event_frame + scripted_event_length >= length)) {
        throw ValidationError("scripted event must end before the last frame");
    }
}

namespace {

template <typename V>
V parse_number(const std::string& key, const std::string& s) {
    V v{};
    const char* b = s.data();
    const char* e = s.data() + s.size();
    const std::from_chars_result r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) {
        throw ValidationError("config key '" + key + "': cannot parse '" + s + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw ValidationError("config key '" + key + "': expected true/false");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct Field {
    std::function<void(Config&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

#define INT_FIELD(name, path)                                                                  \
    {name, Field{[](Config& c, const std::string& v) { c.path = parse_number<int>(name, v); }, \
                 [](const Config& c) { return std::to_string(c.path); }}}
#define U64_FIELD(name, path)                                                                           \
    {name, Field{[](Config& c, const std::string& v) { c.path = parse_number<std::uint64_t>(name, v); }, \
                 [](const Config& c) { return std::to_string(c.path); }}}
#define DBL_FIELD(name, path)                                                                     \
    {name, Field{[](Config& c, const std::string& v) { c.path = parse_number<double>(name, v); }, \
                 [](const Config& c) { return fmt_double(c.path); }}}
#define BOOL_FIELD(name, path)                                                            \
    {name, Field{[](Config& c, const std::string& v) { c.path = parse_bool(name, v); }, \
                 [](const Config& c) { return std::string(c.path ? "true" : "false"); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        INT_FIELD("N", model.num_trackers),
        INT_FIELD("L", model.memory_length),
        INT_FIELD("c", model.embed_dim),
        INT_FIELD("C", model.backbone_dim),
        INT_FIELD("backbone_width", model.backbone_width),
        INT_FIELD("heads", model.heads),
        INT_FIELD("points", model.points),
        INT_FIELD("encoder_layers", model.encoder_layers),
        INT_FIELD("decoder_layers", model.decoder_layers),
        INT_FIELD("ffn_mult", model.ffn_mult),
        INT_FIELD("template_size", model.template_size),
        INT_FIELD("search_width", model.search_width),
        INT_FIELD("search_height", model.search_height),
        U64_FIELD("model_seed", model.seed),
        DBL_FIELD("lambda_cls", loss.cls),
        DBL_FIELD("lambda_r", loss.ref),
        DBL_FIELD("lambda_l1", loss.l1),
        DBL_FIELD("lambda_iou", loss.iou),
        DBL_FIELD("lambda_sim", loss.similarity),
        DBL_FIELD("focal_gamma", loss.focal_gamma),
        DBL_FIELD("focal_alpha", loss.focal_alpha),
        DBL_FIELD("learning_rate", train.learning_rate),
        DBL_FIELD("weight_decay", train.weight_decay),
        DBL_FIELD("grad_clip", train.grad_clip),
        INT_FIELD("lr_decay_epoch", train.lr_decay_epoch),
        DBL_FIELD("lr_decay_factor", train.lr_decay_factor),
        INT_FIELD("epochs", train.epochs),
        INT_FIELD("batch_size", train.batch_size),
        INT_FIELD("num_sequences", train.num_sequences),
        INT_FIELD("max_frame_gap", train.max_frame_gap),
        U64_FIELD("train_seed", train.seed),
        {"curriculum", Field{[](Config& c, const std::string& v) { c.train.curriculum = parse_curriculum(v); },
                             [](const Config& c) { return format_curriculum(c.train.curriculum); }}},
        DBL_FIELD("theta", runtime.theta),
        DBL_FIELD("alpha_select", runtime.alpha_select),
        BOOL_FIELD("temporal_transfer", runtime.temporal_transfer),
        INT_FIELD("world_width", world.width),
        INT_FIELD("world_height", world.height),
        INT_FIELD("world_length", world.length),
        DBL_FIELD("target_min_size", world.target_min_size),
        DBL_FIELD("target_max_size", world.target_max_size),
        DBL_FIELD("speed_min", world.speed_min),
        DBL_FIELD("speed_max", world.speed_max),
        DBL_FIELD("turn_noise", world.turn_noise),
        DBL_FIELD("occlusion_prob", world.occlusion_prob),
        DBL_FIELD("out_of_view_prob", world.out_of_view_prob),
        INT_FIELD("absent_min", world.absent_min),
        INT_FIELD("absent_max", world.absent_max),
        DBL_FIELD("min_displacement", world.min_displacement),
        INT_FIELD("distractors", world.distractors),
        DBL_FIELD("distractor_color_delta", world.distractor_color_delta),
        DBL_FIELD("texture_noise", world.texture_noise),
        INT_FIELD("scripted_event_frame", world.scripted_event_frame),
        INT_FIELD("scripted_event_length", world.scripted_event_length),
        U64_FIELD("world_seed", world.seed),
    };
    return table;
}

}  // namespace

std::vector<CurriculumStage> parse_curriculum(const std::string& text) {
    std::vector<CurriculumStage> stages;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ValidationError("curriculum entries must be epoch:length, got '" + item + "'");
        }
        stages.push_back({parse_number<int>("curriculum", trim(item.substr(0, colon))),
                          parse_number<int>("curriculum", trim(item.substr(colon + 1)))});
    }
    if (stages.empty()) {
        throw ValidationError("curriculum is empty");
    }
    return stages;
}

std::string format_curriculum(const std::vector<CurriculumStage>& stages) {
    std::string out;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(stages[i].epoch) + ":" + std::to_string(stages[i].length);
    }
    return out;
}

Config parse_config(const std::string& text, Config cfg) {
    std::map<std::string, const Field*> index;
    for (const auto& [k, f] : fields()) {
        index[k] = &f;
    }
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = index.find(key);
        if (it == index.end()) {
            throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        it->second->set(cfg, value);
    }
    cfg.model.validate();
    cfg.loss.validate();
    cfg.train.validate();
    cfg.runtime.validate();
    cfg.world.validate();
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_text(const Config& cfg) {
    std::string out;
    for (const auto& [k, f] : fields()) {
        out += k + "=" + f.get(cfg) + "\n";
    }
    return out;
}

}  // namespace eltrack
