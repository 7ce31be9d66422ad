#include "config.hpp"

#include <fstream>
#include <sstream>

#include "roofkit/cloud_io.hpp"
#include "roofkit/errors.hpp"

namespace roofkit::cli {

namespace {

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("config: bad number for " + key + ": '" + value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("config: bad integer for " + key + ": '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidArgument("config: bad boolean for " + key + ": '" + value + "'");
}

constexpr double kDegToRad = 0.017453292519943295;

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") seed = to_u64(key, value);
  else if (key == "seg.k_normals") seg.k_normals = to_u64(key, value);
  else if (key == "seg.angle_deg") seg.angle_threshold = to_double(key, value) * kDegToRad;
  else if (key == "seg.distance") seg.distance_threshold = to_double(key, value);
  else if (key == "seg.min_points") seg.min_points = to_u64(key, value);
  else if (key == "eval.resolution") eval.grid_resolution = to_double(key, value);
  else if (key == "eval.alpha") {
    if (value == "auto") eval.alpha.reset();
    else eval.alpha = to_double(key, value);
  } else if (key == "eval.radius") eval.density_radius = to_double(key, value);
  else if (key == "eval.emd_resample") eval.emd_resample = to_bool(key, value);
  else if (key == "pad.enabled") pad_enabled = to_bool(key, value);
  else if (key == "pad.ring_width") pad.ring_width = to_double(key, value);
  else if (key == "pad.margin") pad.margin = to_double(key, value);
  else if (key == "pad.density") {
    if (value == "auto") pad.density.reset();
    else pad.density = to_double(key, value);
  } else if (key == "optim.n_points") optim.n_points = to_u64(key, value);
  else if (key == "optim.alpha") optim.alpha = to_double(key, value);
  else if (key == "optim.stage1_iters") optim.stage1_iters = to_u64(key, value);
  else if (key == "optim.stage2_iters") optim.stage2_iters = to_u64(key, value);
  else if (key == "optim.step_size") optim.step_size = to_double(key, value);
  else if (key == "optim.step_decay_every") optim.step_decay_every = to_u64(key, value);
  else if (key == "optim.step_decay") optim.step_decay = to_double(key, value);
  else if (key == "optim.assignment_refresh") optim.assignment_refresh = to_u64(key, value);
  else if (key == "optim.emd_slack_rel") optim.emd_slack_rel = to_double(key, value);
  else if (key == "optim.divergence_factor") optim.divergence_factor = to_double(key, value);
  else {
    throw InvalidArgument("config: unknown key '" + key + "'");
  }
}

std::string RunConfig::resolved() const {
  std::ostringstream out;
  auto num = [](double v) { return format_double(v); };
  out << "seed = " << seed << "\n";
  out << "seg.k_normals = " << seg.k_normals << "\n";
  out << "seg.angle_deg = " << num(seg.angle_threshold / kDegToRad) << "\n";
  out << "seg.distance = " << num(seg.distance_threshold) << "\n";
  out << "seg.min_points = " << seg.min_points << "\n";
  out << "eval.resolution = " << num(eval.grid_resolution) << "\n";
  out << "eval.alpha = " << (eval.alpha ? num(*eval.alpha) : "auto") << "\n";
  out << "eval.radius = " << num(eval.density_radius) << "\n";
  out << "eval.emd_resample = " << (eval.emd_resample ? "true" : "false") << "\n";
  out << "pad.enabled = " << (pad_enabled ? "true" : "false") << "\n";
  out << "pad.ring_width = " << num(pad.ring_width) << "\n";
  out << "pad.margin = " << num(pad.margin) << "\n";
  out << "pad.density = " << (pad.density ? num(*pad.density) : "auto") << "\n";
  out << "optim.n_points = " << optim.n_points << "\n";
  out << "optim.alpha = " << num(optim.alpha) << "\n";
  out << "optim.stage1_iters = " << optim.stage1_iters << "\n";
  out << "optim.stage2_iters = " << optim.stage2_iters << "\n";
  out << "optim.step_size = " << num(optim.step_size) << "\n";
  out << "optim.step_decay_every = " << optim.step_decay_every << "\n";
  out << "optim.step_decay = " << num(optim.step_decay) << "\n";
  out << "optim.assignment_refresh = " << optim.assignment_refresh << "\n";
  out << "optim.emd_slack_rel = " << num(optim.emd_slack_rel) << "\n";
  out << "optim.divergence_factor = " << num(optim.divergence_factor) << "\n";
  return out.str();
}

RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config " + path->string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        bool blank = true;
        for (char c : line) {
          if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        }
        if (blank) continue;
        throw IoError(path->string() + ":" + std::to_string(line_no) + ": expected key = value");
      }
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      try {
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const InvalidArgument& e) {
        throw IoError(path->string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  // The evaluation pipeline reuses the segmentation knobs.
  cfg.eval.seg = cfg.seg;
  cfg.eval.heightcut_margin = cfg.pad.margin;
  return cfg;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace roofkit::cli
