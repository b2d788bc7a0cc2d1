#pragma once

// HTTP adapter over the applications module. Stateless: every request reads
// the shared model and allocates its own working memory.
//
// Wire format: multipart form uploads (images as PNG files, scalars as
// fields), JSON for structured replies, PNG for image replies.

#include <atomic>
#include <chrono>
#include <iomanip>
#include <iostream>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>

// Eigen must be parsed before httplib: <resolv.h> defines a `_res` macro.
#include "rsgan/applications.hpp"
#include "rsgan/png_io.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace rsgan {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string checkpoint;
  std::size_t max_image_bytes = 8u << 20;
  int timeout_seconds = 30;

  void validate() const {
    if (port < 0 || port > 65535) throw ConfigError("port must lie in [0, 65535]");
    if (max_image_bytes == 0) throw ConfigError("max_image_bytes must be positive");
    if (timeout_seconds <= 0) throw ConfigError("timeout_seconds must be positive");
  }
};

inline constexpr const char* kWarningHeader = "X-Rsgan-Warning";

/// An error with an HTTP status, raised inside handlers.
class HttpError : public std::runtime_error {
 public:
  HttpError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class Service {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Service(std::shared_ptr<const InferenceModel> model, ServiceConfig cfg)
      : model_(std::move(model)), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!model_) throw ConfigError("service needs a model");
    server_.set_payload_max_length(3 * cfg_.max_image_bytes + (1u << 20));
    server_.set_read_timeout(cfg_.timeout_seconds, 0);
    server_.set_write_timeout(cfg_.timeout_seconds, 0);
    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) res.set_content(nlohmann::json{{"error", httplib::status_message(res.status)}}.dump(),
                                            "application/json");
    });
    routes();
  }

  /// Registers a POST route whose exceptions are mapped to status codes.
  void post(const std::string& path, Handler h) { server_.Post(path, guarded(std::move(h))); }
  void get(const std::string& path, Handler h) { server_.Get(path, guarded(std::move(h))); }

  /// Binds and returns the port (useful with port 0).
  int bind() {
    const int port = cfg_.port == 0 ? server_.bind_to_any_port(cfg_.host) : bind_fixed();
    if (port < 0) throw std::runtime_error("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    port_ = port;
    return port;
  }
  /// Serves until stop(); call bind() first.
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  int port() const { return port_; }
  const InferenceModel& model() const { return *model_; }

 private:
  std::shared_ptr<const InferenceModel> model_;
  ServiceConfig cfg_;
  httplib::Server server_;
  int port_ = -1;

  int bind_fixed() { return server_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1; }

  static std::string opaque_id() {
    static std::atomic<std::uint64_t> counter{0};
    thread_local std::mt19937_64 rng(std::random_device{}());
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << (rng() ^ counter++);
    return o.str();
  }

  static void fail(httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", msg}}.dump(), "application/json");
  }

  static Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const HttpError& e) {
        fail(res, e.status(), e.what());
      } catch (const ResolutionError& e) {
        fail(res, 422, e.what());
      } catch (const RequestError& e) {
        fail(res, 400, e.what());
      } catch (const ImageIoError& e) {
        fail(res, 400, std::string("bad image: ") + e.what());
      } catch (const nlohmann::json::exception& e) {
        fail(res, 400, std::string("bad JSON: ") + e.what());
      } catch (const std::exception& e) {
        const std::string id = opaque_id();
        static std::mutex log_mu;
        {
          std::lock_guard<std::mutex> lk(log_mu);
          std::cerr << "rsgan serve: internal error " << id << " on " << req.path << ": " << e.what() << '\n';
        }
        res.status = 500;
        res.set_content(nlohmann::json{{"error", "internal error"}, {"id", id}}.dump(), "application/json");
      }
    };
  }

  // ---- request helpers ----

  static std::string field(const httplib::Request& req, const std::string& key) {
    if (req.has_file(key)) return req.get_file_value(key).content;
    if (req.has_param(key)) return req.get_param_value(key);
    throw HttpError(400, "missing field '" + key + "'");
  }

  static std::optional<std::string> optional_field(const httplib::Request& req, const std::string& key) {
    if (req.has_file(key) || req.has_param(key)) return field(req, key);
    return std::nullopt;
  }

  static bool flag(const httplib::Request& req, const std::string& key) {
    const auto v = optional_field(req, key);
    if (!v) return false;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0" || v->empty()) return false;
    throw HttpError(400, "field '" + key + "' must be true or false");
  }

  static double number(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0;
    try {
      d = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(d)) throw HttpError(400, "field '" + key + "' must be a number");
    return d;
  }

  struct Warnings {
    std::vector<std::string> items;
    void apply(httplib::Response& res) const {
      if (items.empty()) return;
      std::string s;
      for (const auto& w : items) s += (s.empty() ? "" : "; ") + w;
      res.set_header(kWarningHeader, s);
    }
  };

  Image image(const httplib::Request& req, const std::string& key, bool strict, Warnings& warn) const {
    if (!req.has_file(key)) throw HttpError(400, "missing image '" + key + "'");
    const auto& content = req.get_file_value(key).content;
    if (content.size() > cfg_.max_image_bytes)
      throw HttpError(413, "image '" + key + "' exceeds " + std::to_string(cfg_.max_image_bytes) + " bytes");
    Image im = decode_png(content);
    const int s = model_->resolution();
    if (height(im) == s && width(im) == s) return im;
    if (strict)
      throw ResolutionError("image '" + key + "' is " + std::to_string(width(im)) + "x" + std::to_string(height(im)) +
                            ", model resolution is " + std::to_string(s));
    warn.items.push_back("resized " + key + " from " + std::to_string(width(im)) + "x" + std::to_string(height(im)) +
                         " to " + std::to_string(s) + "x" + std::to_string(s));
    return resize_bilinear(im, s, s);
  }

  static void png(httplib::Response& res, const Image& im, const Warnings& warn) {
    const auto bytes = encode_png(im);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    warn.apply(res);
  }

  void routes() {
    get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"status", "ok"},
                                     {"model_resolution", model_->resolution()},
                                     {"n_attr", model_->config().n_attr}}
                          .dump(),
                      "application/json");
    });

    get("/attributes", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json(model_->attribute_names()).dump(), "application/json");
    });

    post("/encode", [this](const httplib::Request& req, httplib::Response& res) {
      Warnings w;
      const Image x = image(req, "image", flag(req, "strict"), w);
      const Encoding e = encode_full(*model_, x);
      res.set_content(nlohmann::json{{"bundle", e.bundle.to_json()}, {"c_star", e.c_star}}.dump(), "application/json");
      w.apply(res);
    });

    post("/swap", [this](const httplib::Request& req, httplib::Response& res) {
      Warnings w;
      const bool strict = flag(req, "strict");
      const Image src = image(req, "source", strict, w), tgt = image(req, "target", strict, w);
      if (!flag(req, "gd")) return png(res, swap(*model_, src, tgt), w);
      BinaryMask mask(model_->resolution(), model_->resolution());
      if (req.has_file("mask")) {
        Image m = image(req, "mask", strict, w);
        mask = BinaryMask::threshold(luma01(m));
      }
      const auto r = swap_gd(*model_, src, tgt, mask);
      if (r.warning) w.items.push_back(*r.warning);
      png(res, r.image, w);
    });

    post("/edit", [this](const httplib::Request& req, httplib::Response& res) {
      Warnings w;
      const Image x = image(req, "image", flag(req, "strict"), w);
      const auto raw = optional_field(req, "deltas");
      AttributeDeltas deltas;
      if (raw && !raw->empty()) {
        const auto j = nlohmann::json::parse(*raw);
        if (!j.is_object()) throw HttpError(400, "deltas must be a JSON object of name -> value");
        for (const auto& [k, v] : j.items()) {
          if (!v.is_number()) throw HttpError(400, "delta '" + k + "' must be a number");
          deltas[k] = v.get<float>();
        }
      }
      const Region region = parse_region(optional_field(req, "region").value_or("both"));
      png(res, edit_attributes(*model_, x, deltas, region).image, w);
    });

    post("/sample", [this](const httplib::Request& req, httplib::Response& res) {
      Warnings w;
      const Image x = image(req, "image", flag(req, "strict"), w);
      const Region region = parse_region(field(req, "region"));
      const std::string seed_s = optional_field(req, "seed").value_or("0");
      const double seed = number("seed", seed_s);
      if (seed < 0 || seed != std::floor(seed) || seed > 9007199254740992.0)
        throw HttpError(400, "seed must be a non-negative integer");
      png(res, sample_parts(*model_, x, region, static_cast<std::uint64_t>(seed)), w);
    });

    post("/interpolate", [this](const httplib::Request& req, httplib::Response& res) {
      Warnings w;
      const bool strict = flag(req, "strict");
      const Image a = image(req, "image1", strict, w), b = image(req, "image2", strict, w);
      const double t = number("t", field(req, "t"));
      const Region region = parse_region(optional_field(req, "region").value_or("both"));
      png(res, interpolate(*model_, a, b, t, region), w);
    });
  }
};

}  // namespace rsgan
