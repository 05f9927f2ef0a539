#include "mtcad/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "mtcad/errors.hpp"

namespace mtcad {

namespace {

// -- little-endian primitives ------------------------------------------------

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<uint64_t>(v)); }

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_f64_block(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) put_f64(os, x);
}

void get_f64_block(std::istream& is, std::vector<double>& v) {
  for (double& x : v) x = get_f64(is);
}

void put_matrix(std::ostream& os, const ComplexMatrix& m) {
  put_f64_block(os, m.real_plane());
  put_f64_block(os, m.imag_plane());
}

void get_matrix(std::istream& is, ComplexMatrix& m) {
  get_f64_block(is, m.real_plane());
  get_f64_block(is, m.imag_plane());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open for reading: " + path);
  return is;
}

void expect_magic(std::istream& is, const char* magic, const std::string& path) {
  char buf[6];
  is.read(buf, 6);
  if (!is || std::memcmp(buf, magic, 6) != 0)
    throw io_error("bad magic in " + path + " (expected " + magic + ")");
}

}  // namespace

// -- dataset ------------------------------------------------------------------

void save_dataset(const std::string& path, const Dataset& dataset) {
  auto os = open_out(path);
  os.write("MTCDS1", 6);
  put_u32(os, dataset.has_received ? 2 : 1);
  put_u32(os, static_cast<uint32_t>(dataset.n_devices));
  put_u32(os, static_cast<uint32_t>(dataset.pilot_len));
  put_u32(os, static_cast<uint32_t>(dataset.m_antennas));
  put_u64(os, dataset.samples.size());
  for (const Sample& s : dataset.samples) {
    if (static_cast<int>(s.labels.size()) != dataset.n_devices ||
        s.scaled_pilots.rows() != dataset.pilot_len ||
        s.scaled_pilots.cols() != dataset.n_devices)
      throw io_error("save_dataset: sample dims disagree with header");
    os.write(reinterpret_cast<const char*>(s.labels.data()), s.labels.size());
    put_matrix(os, s.scaled_pilots);
    put_matrix(os, s.cov);
    if (dataset.has_received) {
      if (s.received.rows() != dataset.pilot_len ||
          s.received.cols() != dataset.m_antennas)
        throw io_error("save_dataset: received-signal dims disagree with header");
      put_matrix(os, s.received);
    }
  }
  if (!os) throw io_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "MTCDS1", path);
  const uint32_t version = get_u32(is);
  if (version != 1 && version != 2)
    throw io_error("unsupported dataset version in " + path);
  Dataset d;
  d.has_received = version == 2;
  d.n_devices = static_cast<int>(get_u32(is));
  d.pilot_len = static_cast<int>(get_u32(is));
  d.m_antennas = static_cast<int>(get_u32(is));
  const uint64_t count = get_u64(is);
  d.samples.resize(count);
  for (Sample& s : d.samples) {
    s.m_antennas = d.m_antennas;
    s.labels.resize(d.n_devices);
    is.read(reinterpret_cast<char*>(s.labels.data()), s.labels.size());
    s.scaled_pilots = ComplexMatrix(d.pilot_len, d.n_devices);
    get_matrix(is, s.scaled_pilots);
    s.cov = ComplexMatrix(d.pilot_len, d.pilot_len);
    get_matrix(is, s.cov);
    if (d.has_received) {
      s.received = ComplexMatrix(d.pilot_len, d.m_antennas);
      get_matrix(is, s.received);
    }
  }
  if (!is) throw io_error("truncated dataset: " + path);
  return d;
}

// -- checkpoint -----------------------------------------------------------------

void save_checkpoint(const std::string& path, const HTParams& params) {
  auto os = open_out(path);
  os.write("MTCHT1", 6);
  put_u32(os, 1);
  put_u32(os, static_cast<uint32_t>(params.config.layers));
  put_u32(os, static_cast<uint32_t>(params.config.d_model));
  put_u32(os, static_cast<uint32_t>(params.config.d_attn));
  put_u32(os, static_cast<uint32_t>(params.config.heads));
  put_u32(os, static_cast<uint32_t>(params.config.d_ff));
  put_f64(os, params.config.c_clip);
  put_u32(os, static_cast<uint32_t>(params.pilot_len));

  const auto named = params.named_params();
  const auto stats = params.named_stats();
  put_u32(os, static_cast<uint32_t>(named.size() + stats.size()));
  for (const auto& [name, tensor] : named) {
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), name.size());
    put_u32(os, static_cast<uint32_t>(tensor.rank()));
    for (int dim : tensor.shape()) put_u32(os, static_cast<uint32_t>(dim));
    put_f64_block(os, tensor.data());
  }
  for (const auto& [name, vec] : stats) {
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), name.size());
    put_u32(os, 1);
    put_u32(os, static_cast<uint32_t>(vec->size()));
    put_f64_block(os, *vec);
  }
  if (!os) throw io_error("write failed: " + path);
}

HTParams load_checkpoint(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "MTCHT1", path);
  if (get_u32(is) != 1) throw io_error("unsupported checkpoint version in " + path);
  HTConfig config;
  config.layers = static_cast<int>(get_u32(is));
  config.d_model = static_cast<int>(get_u32(is));
  config.d_attn = static_cast<int>(get_u32(is));
  config.heads = static_cast<int>(get_u32(is));
  config.d_ff = static_cast<int>(get_u32(is));
  config.c_clip = get_f64(is);
  const int pilot_len = static_cast<int>(get_u32(is));
  const uint32_t tensor_count = get_u32(is);

  std::map<std::string, std::pair<std::vector<int>, std::vector<double>>> blobs;
  for (uint32_t i = 0; i < tensor_count; ++i) {
    const uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rank = get_u32(is);
    if (rank < 1 || rank > 3) throw io_error("bad tensor rank in " + path);
    std::vector<int> dims(rank);
    size_t total = 1;
    for (auto& d : dims) {
      d = static_cast<int>(get_u32(is));
      total *= static_cast<size_t>(d);
    }
    std::vector<double> data(total);
    get_f64_block(is, data);
    if (!blobs.emplace(name, std::make_pair(std::move(dims), std::move(data))).second)
      throw io_error("duplicate tensor " + name + " in " + path);
  }
  if (!is) throw io_error("truncated checkpoint: " + path);

  HTParams params = HTParams::init(config, pilot_len, /*seed=*/0);
  size_t used = 0;
  for (auto& [name, tensor] : params.named_params()) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw io_error("checkpoint missing tensor " + name);
    if (it->second.first != tensor.shape())
      throw io_error("checkpoint tensor " + name + " has shape " +
                     shape_str(it->second.first) + ", expected " +
                     shape_str(tensor.shape()));
    Tensor t = tensor;
    t.data() = it->second.second;
    ++used;
  }
  for (auto& [name, vec] : params.named_stats()) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw io_error("checkpoint missing statistics " + name);
    if (it->second.second.size() != vec->size())
      throw io_error("checkpoint statistics " + name + " has wrong length");
    *vec = it->second.second;
    ++used;
  }
  if (used != blobs.size()) throw io_error("checkpoint has unknown tensors: " + path);
  params.bn_ready = true;
  return params;
}

// -- experiment config ---------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[scenario]\n";
  os << "n=" << c.scenario.n_devices << "\n";
  os << "lp=" << c.scenario.pilot_len << "\n";
  os << "m=" << c.m_antennas << "\n";
  os << "radius_km=" << fmt_double(c.scenario.cell_radius_km) << "\n";
  os << "p_max_dbm=" << fmt_double(c.scenario.p_max_dbm) << "\n";
  os << "noise_psd_dbm_hz=" << fmt_double(c.scenario.noise_psd_dbm_hz) << "\n";
  os << "bandwidth_hz=" << fmt_double(c.scenario.bandwidth_hz) << "\n";
  os << "activity_ratio=" << fmt_double(c.activity_ratio) << "\n";
  os << "seed=" << c.data_seed << "\n";
  os << "count=" << c.sample_count << "\n";
  os << "\n[model]\n";
  os << "layers=" << c.model.layers << "\n";
  os << "d_model=" << c.model.d_model << "\n";
  os << "d_attn=" << c.model.d_attn << "\n";
  os << "heads=" << c.model.heads << "\n";
  os << "d_ff=" << c.model.d_ff << "\n";
  os << "c_clip=" << fmt_double(c.model.c_clip) << "\n";
  os << "\n[train]\n";
  os << "epochs=" << c.train.epochs << "\n";
  os << "steps=" << c.train.steps_per_epoch << "\n";
  os << "batch=" << c.train.batch_size << "\n";
  os << "lr=" << fmt_double(c.train.lr) << "\n";
  os << "decay_epochs=" << fmt_int_list(c.train.decay_epochs) << "\n";
  os << "decay_factor=" << fmt_double(c.train.decay_factor) << "\n";
  os << "seed=" << c.train.seed << "\n";
  os << "fresh_scenario=" << (c.fresh_scenario_per_batch ? 1 : 0) << "\n";
  os << "\n[eval]\n";
  os << "passes=" << c.cd_passes << "\n";
  return os.str();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw io_error("config line " + std::to_string(lineno) + ": bad section");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw io_error("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = section + "." + line.substr(0, eq);
    const std::string value = line.substr(eq + 1);

    try {
      if (key == "scenario.n") c.scenario.n_devices = std::stoi(value);
      else if (key == "scenario.lp") c.scenario.pilot_len = std::stoi(value);
      else if (key == "scenario.m") c.m_antennas = std::stoi(value);
      else if (key == "scenario.radius_km") c.scenario.cell_radius_km = std::stod(value);
      else if (key == "scenario.p_max_dbm") c.scenario.p_max_dbm = std::stod(value);
      else if (key == "scenario.noise_psd_dbm_hz") c.scenario.noise_psd_dbm_hz = std::stod(value);
      else if (key == "scenario.bandwidth_hz") c.scenario.bandwidth_hz = std::stod(value);
      else if (key == "scenario.activity_ratio") c.activity_ratio = std::stod(value);
      else if (key == "scenario.seed") c.data_seed = std::stoull(value);
      else if (key == "scenario.count") c.sample_count = std::stoi(value);
      else if (key == "model.layers") c.model.layers = std::stoi(value);
      else if (key == "model.d_model") c.model.d_model = std::stoi(value);
      else if (key == "model.d_attn") c.model.d_attn = std::stoi(value);
      else if (key == "model.heads") c.model.heads = std::stoi(value);
      else if (key == "model.d_ff") c.model.d_ff = std::stoi(value);
      else if (key == "model.c_clip") c.model.c_clip = std::stod(value);
      else if (key == "train.epochs") c.train.epochs = std::stoi(value);
      else if (key == "train.steps") c.train.steps_per_epoch = std::stoi(value);
      else if (key == "train.batch") c.train.batch_size = std::stoi(value);
      else if (key == "train.lr") c.train.lr = std::stod(value);
      else if (key == "train.decay_epochs") c.train.decay_epochs = parse_int_list(value);
      else if (key == "train.decay_factor") c.train.decay_factor = std::stod(value);
      else if (key == "train.seed") c.train.seed = std::stoull(value);
      else if (key == "train.fresh_scenario") c.fresh_scenario_per_batch = std::stoi(value) != 0;
      else if (key == "eval.passes") c.cd_passes = std::stoi(value);
      else throw io_error("config line " + std::to_string(lineno) + ": unknown key " + key);
    } catch (const io_error&) {
      throw;
    } catch (const std::exception&) {
      throw io_error("config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  return c;
}

void save_config(const std::string& path, const ExperimentConfig& config) {
  auto os = open_out(path);
  os << format_config(config);
  if (!os) throw io_error("write failed: " + path);
}

ExperimentConfig load_config(const std::string& path) {
  auto is = open_in(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

// -- curves and traces -----------------------------------------------------------

void save_curve(const std::string& path, const RocCurve& curve) {
  auto os = open_out(path);
  os << "# detector=" << curve.detector << " samples=" << curve.sample_count
     << " n=" << curve.n_devices << " lp=" << curve.pilot_len
     << " m=" << curve.m_antennas << "\n";
  os << "xi\tpm\tpf\n";
  os.precision(17);
  for (const auto& p : curve.points)
    os << p.xi << "\t" << p.pm << "\t" << p.pf << "\n";
  if (!os) throw io_error("write failed: " + path);
}

RocCurve load_curve(const std::string& path) {
  auto is = open_in(path);
  RocCurve curve;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("xi", 0) == 0) continue;
    RocPoint p;
    if (std::sscanf(line.c_str(), "%lf\t%lf\t%lf", &p.xi, &p.pm, &p.pf) != 3)
      throw io_error("bad curve row in " + path);
    curve.points.push_back(p);
  }
  return curve;
}

void save_loss_trace(const std::string& path, const std::vector<EpochStat>& trace) {
  auto os = open_out(path);
  os << "epoch\tmean_loss\tlr\n";
  os.precision(17);
  for (const auto& e : trace)
    os << e.epoch << "\t" << e.mean_loss << "\t" << e.lr << "\n";
  if (!os) throw io_error("write failed: " + path);
}

}  // namespace mtcad
