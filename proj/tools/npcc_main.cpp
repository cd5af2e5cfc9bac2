#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "npcc/codec.hpp"
#include "npcc/gradcheck.hpp"
#include "npcc/metrics.hpp"
#include "npcc/nn/weights_io.hpp"
#include "npcc/pcio.hpp"
#include "npcc/trainer.hpp"

namespace {

using namespace npcc;

Rational parseScale(const std::string& text) {
  Rational s;
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      s.num = uint32_t(std::stoul(text));
      s.den = 1;
    } else {
      s.num = uint32_t(std::stoul(text.substr(0, slash)));
      s.den = uint32_t(std::stoul(text.substr(slash + 1)));
    }
  } catch (const std::exception&) {
    throw CLI::ValidationError("--scale", "expected <num> or <num>/<den>");
  }
  if (s.num == 0 || s.den == 0)
    throw CLI::ValidationError("--scale", "numerator and denominator must be positive");
  return s;
}

std::vector<uint8_t> readFileBytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw MalformedFile("cannot open file: " + path);
  const std::streamsize size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  f.read(reinterpret_cast<char*>(bytes.data()), size);
  return bytes;
}

void writeFileBytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw MalformedFile("cannot open file for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw MalformedFile("failed writing file: " + path);
}

std::map<std::string, std::string> readKeyFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MalformedFile("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

PointMatrix coordsToPoints(const CoordMatrix& coords) {
  return coords.cast<double>();
}

int cmdEncode(const std::string& input, const std::string& weights_path,
              const std::string& scale_text, double precision, const std::string& out) {
  const RawCloud cloud = readCloudAuto(input);
  const LoadedModel<float> model = loadMopaModel<float>(weights_path);
  CodecConfig cfg;
  cfg.scale = parseScale(scale_text);
  const CoordMatrix quantized = quantizeMm(cloud.points, precision);
  const EncodeResult r = encodePointCloud(quantized, cfg, model.weights, model.hash);
  writeFileBytes(out, r.bytes);
  std::printf("bpp %.6f\n", r.bpp);
  std::fprintf(stderr, "encoded %lld points, %llu payload bits, %zu stream bytes\n",
               (long long)cloud.points.rows(), (unsigned long long)r.payload_bits,
               r.bytes.size());
  return 0;
}

int cmdDecode(const std::string& input, const std::string& weights_path,
              const std::string& out) {
  const LoadedModel<float> model = loadMopaModel<float>(weights_path);
  const DecodeResult r = decodePointCloud(readFileBytes(input), model.weights, model.hash);
  writePly(out, coordsToPoints(r.reconstruction));
  std::fprintf(stderr, "decoded %lld points\n", (long long)r.reconstruction.rows());
  return 0;
}

int cmdEval(const std::string& ref_path, const std::string& rec_path, double peak,
            int normal_k) {
  const RawCloud ref = readCloudAuto(ref_path);
  const RawCloud rec = readCloudAuto(rec_path);
  const double d1 = d1Psnr(ref.points, rec.points, peak);
  const double d2 = d2Psnr(ref.points, rec.points, peak, normal_k);
  std::printf("d1_psnr %.6f\nd2_psnr %.6f\n", d1, d2);
  return 0;
}

int cmdBdrate(const std::string& anchor_path, const std::string& test_path,
              const std::string& channel) {
  const RdCurve anchor = readRdCurveCsv(anchor_path);
  const RdCurve test = readRdCurveCsv(test_path);
  const RdChannel ch = channel == "d2" ? RdChannel::D2 : RdChannel::D1;
  std::printf("bdrate %.2f%%\n", bdRate(anchor, test, ch));
  return 0;
}

int cmdRdSweep(const std::string& input, const std::string& weights_path,
               const std::string& scales_text, double precision, double peak,
               const std::string& out_csv, const std::string& out_svg) {
  const RawCloud cloud = readCloudAuto(input);
  const LoadedModel<float> model = loadMopaModel<float>(weights_path);
  const CoordMatrix quantized = quantizeMm(cloud.points, precision);
  const PointMatrix reference = coordsToPoints(quantized);

  std::vector<Rational> scales;
  std::stringstream ss(scales_text);
  std::string token;
  while (std::getline(ss, token, ',')) scales.push_back(parseScale(token));
  if (scales.empty()) throw MalformedFile("no scales given");

  RdCurve curve;
  for (const Rational& s : scales) {
    CodecConfig cfg;
    cfg.scale = s;
    const EncodeResult enc = encodePointCloud(quantized, cfg, model.weights, model.hash);
    const DecodeResult dec = decodePointCloud(enc.bytes, model.weights, model.hash);
    RdPoint p;
    p.bpp = enc.bpp;
    const PointMatrix rec = coordsToPoints(dec.reconstruction);
    p.psnr_d1 = d1Psnr(reference, rec, peak);
    p.psnr_d2 = d2Psnr(reference, rec, peak);
    curve.points.push_back(p);
    std::fprintf(stderr, "scale %u/%u -> bpp %.4f d1 %.2f d2 %.2f\n", s.num, s.den, p.bpp,
                 p.psnr_d1, p.psnr_d2);
  }
  std::sort(curve.points.begin(), curve.points.end(),
            [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  writeRdCurveCsv(out_csv, curve);
  if (!out_svg.empty()) writeRdSvg(out_svg, {curve}, {"npcc"}, RdChannel::D1);
  std::printf("wrote %s (%zu points)\n", out_csv.c_str(), curve.points.size());
  return 0;
}

int cmdTrainToy(const std::string& config_path, const std::string& out) {
  const auto kv = readKeyFile(config_path);
  const auto get = [&](const char* key, double fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
  };
  TrainConfig cfg;
  cfg.lr = get("lr", cfg.lr);
  cfg.batch = int(get("batch", cfg.batch));
  cfg.steps = int(get("steps", cfg.steps));
  cfg.seed = uint64_t(get("seed", double(cfg.seed)));
  cfg.pair_min_level = int(get("min_level", cfg.pair_min_level));
  cfg.pair_max_level = int(get("max_level", cfg.pair_max_level));
  cfg.k = int(get("k", cfg.k));
  cfg.heads = int(get("heads", cfg.heads));
  cfg.cph = int(get("cph", cfg.cph));
  cfg.use_double = get("precision", 32) >= 64;
  const int clouds = int(get("corpus_clouds", 6));
  const Eigen::Index points = Eigen::Index(get("corpus_points", 1200));
  const int32_t extent = int32_t(get("corpus_extent", 128));

  const auto corpus = defaultCorpus(cfg.seed + 1, clouds, points, extent);
  const ToyTrainResult result = trainToy(cfg, corpus, out);
  const auto log_it = kv.find("log_csv");
  if (log_it != kv.end()) writeTrainLogCsv(log_it->second, result.log);
  std::printf("final_loss %.6f\n", result.final_loss);
  std::fprintf(stderr, "trained %d steps, wrote %s\n", cfg.steps, out.c_str());
  return 0;
}

int cmdGradcheck(uint64_t seed) {
  const auto reports = runGradChecks(seed);
  bool ok = true;
  for (const auto& r : reports) {
    std::printf("%-16s max_rel_err %.3e (tol %.0e, %d checks) %s\n", r.name.c_str(),
                r.max_rel_err, r.tolerance, r.checks, r.passed() ? "ok" : "FAIL");
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"npcc: multiscale point-cloud geometry codec with neighborhood point attention"};
  app.require_subcommand(1);

  std::string input, weights, out, ref, rec, anchor, test;
  std::string scale = "1/1", channel = "d1", scales = "1/1", config;
  std::string out_csv = "rd.csv", out_svg;
  double precision = 1.0, peak = 30000.0;
  int normal_k = 9;
  uint64_t seed = 7;

  auto* enc = app.add_subcommand("encode", "Compress a point cloud into an .npcc stream");
  enc->add_option("--input", input, "Input cloud (.ply or .bin)")->required();
  enc->add_option("--weights", weights, "Model weights (.npaw)")->required();
  enc->add_option("--scale", scale, "Lossy scaling factor num/den (1/1 = lossless)");
  enc->add_option("--precision", precision, "Quantization step in input units");
  enc->add_option("--out", out, "Output bitstream path")->required();

  auto* dec = app.add_subcommand("decode", "Decompress an .npcc stream to a PLY");
  dec->add_option("--input", input, "Input bitstream")->required();
  dec->add_option("--weights", weights, "Model weights (.npaw)")->required();
  dec->add_option("--out", out, "Output PLY path")->required();

  auto* ev = app.add_subcommand("eval", "D1/D2 PSNR between two clouds");
  ev->add_option("--ref", ref, "Reference cloud")->required();
  ev->add_option("--rec", rec, "Reconstructed cloud")->required();
  ev->add_option("--peak", peak, "PSNR peak value");
  ev->add_option("--normal-k", normal_k, "Neighbors for PCA normals");

  auto* bd = app.add_subcommand("bdrate", "BD-rate between two R-D CSV curves");
  bd->add_option("--anchor", anchor, "Anchor curve CSV")->required();
  bd->add_option("--test", test, "Test curve CSV")->required();
  bd->add_option("--channel", channel, "d1 or d2")->check(CLI::IsMember({"d1", "d2"}));

  auto* sweep = app.add_subcommand("rd-sweep", "Encode at several scales, emit CSV + SVG");
  sweep->add_option("--input", input, "Input cloud")->required();
  sweep->add_option("--weights", weights, "Model weights")->required();
  sweep->add_option("--scales", scales, "Comma-separated scale list, e.g. 1,1/2,1/4");
  sweep->add_option("--precision", precision, "Quantization step");
  sweep->add_option("--peak", peak, "PSNR peak value");
  sweep->add_option("--out-csv", out_csv, "Output CSV path");
  sweep->add_option("--out-svg", out_svg, "Output SVG path");

  auto* train = app.add_subcommand("train-toy", "Desk-scale training on the synthetic corpus");
  train->add_option("--config", config, "key=value config file")->required();
  train->add_option("--out", out, "Output weights path")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks for every layer");
  grad->add_option("--seed", seed, "PRNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits clean, usage errors exit 2
  }

  try {
    if (enc->parsed()) return cmdEncode(input, weights, scale, precision, out);
    if (dec->parsed()) return cmdDecode(input, weights, out);
    if (ev->parsed()) return cmdEval(ref, rec, peak, normal_k);
    if (bd->parsed()) return cmdBdrate(anchor, test, channel);
    if (sweep->parsed())
      return cmdRdSweep(input, weights, scales, precision, peak, out_csv, out_svg);
    if (train->parsed()) return cmdTrainToy(config, out);
    if (grad->parsed()) return cmdGradcheck(seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
