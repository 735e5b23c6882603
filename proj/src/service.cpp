#include "spectv/service.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "spectv/error.hpp"
#include "spectv/formats.hpp"
#include "spectv/fusion.hpp"
#include "spectv/image_io.hpp"

namespace spectv {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kNumerical, "service", "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string random_token(std::size_t bytes) {
  std::vector<unsigned char> buf(bytes);
  if (RAND_bytes(buf.data(), static_cast<int>(bytes)) != 1) {
    throw Error(ErrorKind::kNumerical, "service", "random source failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char b : buf) {
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

namespace {

enum class State { kQueued, kRunning, kReady, kFailed };

const char* to_string(State s) {
  switch (s) {
    case State::kQueued: return "queued";
    case State::kRunning: return "running";
    case State::kReady: return "ready";
    case State::kFailed: return "failed";
  }
  return "?";
}

struct Session {
  std::string id;
  PipelineConfig config;
  std::string preset;
  FusionInputs inputs;  // staged; released once prepared
  std::string key1, key2;

  std::atomic<int> done{0};
  std::atomic<int> total{0};

  mutable std::mutex mu;
  State state = State::kQueued;
  std::shared_ptr<const PreparedFusion> prepared;
  std::string error, error_stage;
  std::string last_spec;
  Clock::time_point last_access = Clock::now();
};

struct CacheEntry {
  std::shared_ptr<const SpectralDecomposition> d;
  Clock::time_point last_used;
};

struct HttpError {
  int status;
  std::string stage;
  std::string message;
};

// Same config and same staged pixels give the same decomposition.
std::string config_key(const PipelineConfig& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s|%d|%.17g|%.17g|%.17g|%d|%d|%.17g|%s", to_string(c.variant).c_str(), c.bands,
                c.base, c.ratio, c.solver.tol, c.solver.max_iter, c.gf_steps, c.gf_t_max,
                to_string(c.color_space).c_str());
  return buf;
}

std::string content_key(const Image& img, const PipelineConfig& c) {
  std::string bytes = config_key(c);
  char dims[64];
  std::snprintf(dims, sizeof dims, "|%d|%d|%d|%s|", img.height(), img.width(), img.channels(),
                to_string(img.color_space()).c_str());
  bytes += dims;
  const auto& d = img.data();
  bytes.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
  return sha256_hex(bytes.data(), bytes.size());
}

json config_json(const PipelineConfig& c, const std::string& preset) {
  return {{"variant", to_string(c.variant)}, {"bands", c.bands}, {"base", c.base}, {"ratio", c.ratio},
          {"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}, {"gf_steps", c.gf_steps},
          {"t_max", c.gf_t_max}, {"color", to_string(c.color_space)}, {"feather", c.feather_radius},
          {"max_side", c.max_side}, {"preset", preset}};
}

int status_for(const Error& e) {
  if (e.stage() == "registration" || e.stage() == "masks") return 422;
  if (e.kind() == ErrorKind::kNumerical) return 500;
  return 400;
}

void send_error(httplib::Response& res, int status, const std::string& stage, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}, {"stage", stage}}.dump(), "application/json");
}

}  // namespace

struct FusionService::Impl {
  ServiceConfig cfg;
  httplib::Server server;
  int port = -1;

  std::mutex mu;  // sessions and cache
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::map<std::string, CacheEntry> cache;

  std::mutex queue_mu;
  std::condition_variable queue_cv;
  std::deque<std::shared_ptr<Session>> queue;
  bool stopping = false;
  std::thread worker;

  explicit Impl(ServiceConfig c) : cfg(std::move(c)) {
    server.set_payload_max_length(cfg.max_upload);
    server.Post("/sessions", [this](const httplib::Request& q, httplib::Response& r) { create(q, r); });
    server.Get(R"(/sessions/([0-9a-f]+))", [this](const httplib::Request& q, httplib::Response& r) { status(q, r); });
    server.Delete(R"(/sessions/([0-9a-f]+))",
                  [this](const httplib::Request& q, httplib::Response& r) { remove(q, r); });
    server.Post(R"(/sessions/([0-9a-f]+)/preview)",
                [this](const httplib::Request& q, httplib::Response& r) { preview(q, r); });
    server.Get(R"(/sessions/([0-9a-f]+)/spec)", [this](const httplib::Request& q, httplib::Response& r) { spec(q, r); });
    server.Get(R"(/sessions/([0-9a-f]+)/bands/(\d+)/(\d+))",
               [this](const httplib::Request& q, httplib::Response& r) { band(q, r); });
    server.Get("/health", [](const httplib::Request&, httplib::Response& r) {
      r.set_content(R"({"ok":true})", "application/json");
    });
    if (!cfg.cors_origin.empty()) {
      server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& r) {
        r.set_header("Access-Control-Allow-Origin", cfg.cors_origin);
      });
      server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& r) {
        r.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        r.set_header("Access-Control-Allow-Headers", "Content-Type");
        r.status = 204;
      });
    }
    server.set_error_handler([](const httplib::Request&, httplib::Response& r) {
      if (!r.body.empty()) return;
      const std::string stage = r.status == 413 ? "upload" : "request";
      send_error(r, r.status, stage, httplib::status_message(r.status));
    });
    worker = std::thread([this] { run_worker(); });
  }

  ~Impl() {
    {
      std::lock_guard lock(queue_mu);
      stopping = true;
    }
    queue_cv.notify_all();
    server.stop();
    if (worker.joinable()) worker.join();
  }

  // Drops idle sessions and unused cache entries.
  void expire() {
    const auto now = Clock::now();
    const auto ttl = std::chrono::duration<double>(cfg.session_ttl);
    std::lock_guard lock(mu);
    for (auto it = sessions.begin(); it != sessions.end();) {
      std::lock_guard sl(it->second->mu);
      const bool busy = it->second->state == State::kQueued || it->second->state == State::kRunning;
      if (!busy && now - it->second->last_access > ttl) {
        it = sessions.erase(it);
      } else {
        ++it;
      }
    }
    for (auto it = cache.begin(); it != cache.end();) {
      it = now - it->second.last_used > ttl ? cache.erase(it) : std::next(it);
    }
  }

  std::shared_ptr<Session> find(const std::string& id) {
    expire();
    std::lock_guard lock(mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "session", "unknown session"};
    std::lock_guard sl(it->second->mu);
    it->second->last_access = Clock::now();
    return it->second;
  }

  std::shared_ptr<const SpectralDecomposition> cached(const std::string& key) {
    std::lock_guard lock(mu);
    const auto it = cache.find(key);
    if (it == cache.end()) return nullptr;
    it->second.last_used = Clock::now();
    return it->second.d;
  }

  void store(const std::string& key, std::shared_ptr<const SpectralDecomposition> d) {
    std::lock_guard lock(mu);
    cache[key] = {std::move(d), Clock::now()};
  }

  PipelineConfig parse_config(const std::string& text, std::string& preset) const {
    PipelineConfig c;
    c.solver.tol = cfg.preview_tol;
    c.max_side = cfg.preview_cap;
    preset = "custom";
    if (text.empty()) return c;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw HttpError{400, "config", std::string("malformed JSON: ") + e.what()};
    }
    if (!j.is_object()) throw HttpError{400, "config", "config must be a JSON object"};
    try {
      for (const auto& [k, v] : j.items()) {
        if (k == "variant") c.variant = flow_variant_from_string(v.get<std::string>());
        else if (k == "bands") c.bands = v.get<int>();
        else if (k == "base") c.base = v.get<double>();
        else if (k == "ratio") c.ratio = v.get<double>();
        else if (k == "tol") c.solver.tol = v.get<double>();
        else if (k == "max_iter") c.solver.max_iter = v.get<int>();
        else if (k == "gf_steps") c.gf_steps = v.get<int>();
        else if (k == "t_max") c.gf_t_max = v.get<double>();
        else if (k == "color") c.color_space = color_space_from_string(v.get<std::string>());
        else if (k == "feather") c.feather_radius = v.get<double>();
        else if (k == "max_side") c.max_side = v.get<int>();
        else if (k == "preset") preset = v.get<std::string>();
        else throw HttpError{400, "config", "unknown config key '" + k + "'"};
      }
    } catch (const json::exception& e) {
      throw HttpError{400, "config", std::string("bad config value: ") + e.what()};
    }
    // The cap is a ceiling; 0 or larger requests run at the cap.
    if (c.max_side <= 0 || c.max_side > cfg.preview_cap) c.max_side = cfg.preview_cap;
    c.validate();
    return c;
  }

  static Image decode_upload(const httplib::Request& q, const std::string& field) {
    if (!q.has_file(field)) throw HttpError{400, "upload", "missing field '" + field + "'"};
    const std::string& body = q.get_file_value(field).content;
    try {
      return decode_png(std::vector<std::uint8_t>(body.begin(), body.end()));
    } catch (const Error& e) {
      throw HttpError{400, "upload", field + ": " + e.what()};
    }
  }

  void create(const httplib::Request& q, httplib::Response& res) {
    expire();
    try {
      auto s = std::make_shared<Session>();
      s->config = parse_config(q.has_file("config") ? q.get_file_value("config").content : "", s->preset);
      FusionInputs in;
      in.image1 = decode_upload(q, "image1");
      in.image2 = decode_upload(q, "image2");
      if (in.image1.channels() != in.image2.channels()) {
        throw HttpError{400, "upload", "images must both be gray or both be RGB"};
      }
      if (q.has_file("landmarks1")) in.landmarks1 = parse_landmarks(q.get_file_value("landmarks1").content);
      if (q.has_file("landmarks2")) in.landmarks2 = parse_landmarks(q.get_file_value("landmarks2").content);
      if (in.landmarks1.has_value() != in.landmarks2.has_value()) {
        throw HttpError{422, "registration", "landmarks are needed for both images or neither"};
      }
      for (const auto& [name, part] : q.files) {
        RegionMaskSet* set = nullptr;
        std::string region;
        for (const auto& [prefix, target] : {std::pair{"mask1:", &in.masks1}, {"mask2:", &in.masks2},
                                             {"mask:", &in.masks1}}) {
          if (name.rfind(prefix, 0) == 0) {
            set = target;
            region = name.substr(std::strlen(prefix));
            break;
          }
        }
        if (!set) continue;
        Image m;
        try {
          m = to_mask(decode_png(std::vector<std::uint8_t>(part.content.begin(), part.content.end())));
        } catch (const Error& e) {
          throw HttpError{400, "upload", name + ": " + e.what()};
        }
        set->add(region, m);
      }
      if (in.landmarks1) validate_landmarks(*in.landmarks1, *in.landmarks2, in.image1.grid());
      if (!in.masks1.empty() && in.masks1.grid() != in.image1.grid()) {
        throw HttpError{422, "masks", "image 1 masks do not match its size"};
      }
      if (!in.masks2.empty() && in.masks2.grid() != in.image2.grid()) {
        throw HttpError{422, "masks", "image 2 masks do not match its size"};
      }
      s->inputs = stage_inputs(std::move(in), s->preset, s->config.max_side);
      s->key1 = content_key(s->inputs.image1, s->config);
      s->key2 = content_key(s->inputs.image2, s->config);
      s->id = random_token();

      auto d1 = cached(s->key1), d2 = cached(s->key2);
      if (d1 && d2) {
        // Both decompositions known: only registration and masks remain.
        s->prepared = std::make_shared<const PreparedFusion>(prepare_fusion(s->inputs, s->config, {}, d1, d2));
        s->inputs = {};
        s->state = State::kReady;
      }
      {
        std::lock_guard lock(mu);
        sessions[s->id] = s;
      }
      if (s->state == State::kQueued) {
        std::lock_guard lock(queue_mu);
        queue.push_back(s);
        queue_cv.notify_one();
      }
      res.status = 201;
      res.set_content(describe(*s).dump(), "application/json");
    } catch (const HttpError& e) {
      send_error(res, e.status, e.stage, e.message);
    } catch (const Error& e) {
      send_error(res, status_for(e), e.stage(), e.what());
    }
  }

  void run_worker() {
    for (;;) {
      std::shared_ptr<Session> s;
      {
        std::unique_lock lock(queue_mu);
        queue_cv.wait(lock, [this] { return stopping || !queue.empty(); });
        if (stopping) return;
        s = queue.front();
        queue.pop_front();
      }
      {
        std::lock_guard sl(s->mu);
        s->state = State::kRunning;
      }
      try {
        // An identical image may have finished since the upload.
        auto d1 = cached(s->key1), d2 = cached(s->key2);
        auto progress = [s](int done, int total) {
          s->done = done;
          s->total = total;
        };
        auto p = std::make_shared<const PreparedFusion>(prepare_fusion(s->inputs, s->config, progress, d1, d2));
        store(s->key1, p->d1);
        store(s->key2, p->d2);
        std::lock_guard sl(s->mu);
        s->prepared = std::move(p);
        s->inputs = {};
        s->state = State::kReady;
      } catch (const std::exception& e) {
        std::lock_guard sl(s->mu);
        s->state = State::kFailed;
        s->error = e.what();
        const auto* se = dynamic_cast<const Error*>(&e);
        s->error_stage = se ? se->stage() : "decomposition";
        s->inputs = {};
      }
    }
  }

  static std::vector<double> output_mean(const SpectralDecomposition& d) {
    Image c(1, 1, d.channels, d.color_space);
    for (int ch = 0; ch < d.channels; ++ch) c.at(ch, 0, 0) = d.mean[ch];
    return to_output_space(c).data();
  }

  json describe(const Session& s) const {
    std::lock_guard sl(s.mu);
    json j{{"id", s.id}, {"status", to_string(s.state)}, {"config", config_json(s.config, s.preset)}};
    const int per_image = s.config.variant == FlowVariant::kInverseScaleSpace ? s.config.bands : s.config.gf_steps;
    if (s.state == State::kReady) {
      j["progress"] = {{"done", 2 * per_image}, {"total", 2 * per_image}};
      const auto& p = *s.prepared;
      j["bands"] = p.d1->band_count();
      j["channels"] = p.d1->channels;
      j["height"] = p.d1->height;
      j["width"] = p.d1->width;
      j["height2"] = p.d2->height;
      j["width2"] = p.d2->width;
      j["regions1"] = p.masks1.names;
      j["regions2"] = p.masks2.names;
      j["converged"] = p.d1->all_converged() && p.d2->all_converged();
      // In the color space of the band PNGs, so clients can sum bands back up.
      j["mean1"] = output_mean(*p.d1);
      j["mean2"] = output_mean(*p.d2);
    } else {
      j["progress"] = {{"done", s.done.load()}, {"total", 2 * per_image}};
    }
    if (s.state == State::kFailed) {
      j["error"] = s.error;
      j["stage"] = s.error_stage;
    }
    return j;
  }

  std::shared_ptr<const PreparedFusion> ready(const Session& s) const {
    std::lock_guard sl(s.mu);
    if (s.state == State::kFailed) throw HttpError{409, s.error_stage, "session failed: " + s.error};
    if (s.state != State::kReady) throw HttpError{409, "session", "session is not ready"};
    return s.prepared;
  }

  void status(const httplib::Request& q, httplib::Response& res) {
    try {
      res.set_content(describe(*find(q.matches[1])).dump(), "application/json");
    } catch (const HttpError& e) {
      send_error(res, e.status, e.stage, e.message);
    }
  }

  void remove(const httplib::Request& q, httplib::Response& res) {
    std::lock_guard lock(mu);
    if (sessions.erase(q.matches[1]) == 0) {
      send_error(res, 404, "session", "unknown session");
    } else {
      res.status = 204;
    }
  }

  void preview(const httplib::Request& q, httplib::Response& res) {
    try {
      const auto s = find(q.matches[1]);
      const auto p = ready(*s);
      FilterSpec spec;
      Image out;
      try {
        spec = parse_filter_spec(q.body);
        out = render_fusion(*p, spec);
      } catch (const Error& e) {
        throw HttpError{e.kind() == ErrorKind::kNumerical ? 500 : 400, e.stage().empty() ? "filter" : e.stage(),
                        e.what()};
      }
      if (!out.all_finite()) throw HttpError{500, "fusion", "result contains non-finite values"};
      const auto png = encode_png(out);
      {
        std::lock_guard sl(s->mu);
        s->last_spec = q.body;
      }
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    } catch (const HttpError& e) {
      send_error(res, e.status, e.stage, e.message);
    }
  }

  void spec(const httplib::Request& q, httplib::Response& res) {
    try {
      const auto s = find(q.matches[1]);
      std::lock_guard sl(s->mu);
      if (s->last_spec.empty()) throw HttpError{404, "filter", "no preview has been rendered yet"};
      res.set_content(s->last_spec, "text/plain");
    } catch (const HttpError& e) {
      send_error(res, e.status, e.stage, e.message);
    }
  }

  void band(const httplib::Request& q, httplib::Response& res) {
    try {
      const auto s = find(q.matches[1]);
      const auto p = ready(*s);
      const std::string image = q.matches[2], kstr = q.matches[3];
      if (image != "1" && image != "2") throw HttpError{404, "bands", "image must be 1 or 2"};
      const auto& d = image == "1" ? *p->d1 : *p->d2;
      if (kstr.size() > 6) throw HttpError{404, "bands", "no such band"};
      const int k = std::stoi(kstr);
      if (k < 1 || k > d.band_count()) {
        throw HttpError{404, "bands", "band " + kstr + " outside 1.." + std::to_string(d.band_count())};
      }
      SaveOptions opts;
      opts.offset = true;
      if (q.has_param("depth")) {
        const std::string depth = q.get_param_value("depth");
        if (depth != "8" && depth != "16") throw HttpError{400, "bands", "depth must be 8 or 16"};
        opts.bit_depth = std::stoi(depth);
      }
      const auto png = encode_png(band_visual(d, k - 1), opts);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    } catch (const HttpError& e) {
      send_error(res, e.status, e.stage, e.message);
    }
  }
};

FusionService::FusionService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
FusionService::~FusionService() = default;

int FusionService::bind() {
  auto& i = *impl_;
  if (i.cfg.port == 0) {
    i.port = i.server.bind_to_any_port(i.cfg.host);
  } else {
    i.port = i.server.bind_to_port(i.cfg.host, i.cfg.port) ? i.cfg.port : -1;
  }
  return i.port;
}

void FusionService::serve() { impl_->server.listen_after_bind(); }

void FusionService::stop() { impl_->server.stop(); }

const ServiceConfig& FusionService::config() const { return impl_->cfg; }

}  // namespace spectv
