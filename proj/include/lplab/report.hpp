#pragma once

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace lplab {

// Machine reports: meta + named sections with pass/fail/info status.

enum class Status { Pass, Fail, Info };

inline const char* status_name(Status s) {
    switch (s) {
        case Status::Pass: return "pass";
        case Status::Fail: return "fail";
        default: return "info";
    }
}

inline Status status_from_name(const std::string& s) {
    if (s == "pass") return Status::Pass;
    if (s == "fail") return Status::Fail;
    if (s == "info") return Status::Info;
    throw PreconditionError("report: unknown status '" + s + "'");
}

struct Meta {
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::int64_t timestamp = 0;
};

struct Section {
    std::string name;
    Status status = Status::Info;
    nlohmann::json records = nlohmann::json::object();
};

struct Report {
    Meta meta;
    std::vector<Section> sections;

    bool failed() const {
        for (auto& s : sections)
            if (s.status == Status::Fail) return true;
        return false;
    }
    Section& add(const std::string& name, Status st, nlohmann::json rec = nlohmann::json::object()) {
        sections.push_back({name, st, std::move(rec)});
        return sections.back();
    }
};

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Hash of the canonical dump (object keys sorted by nlohmann::json, no whitespace).
inline std::string config_hash(const nlohmann::json& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.dump())));
    return buf;
}

// SOURCE_DATE_EPOCH if set, else 0, so reports are reproducible byte for byte.
inline std::int64_t report_timestamp() {
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        long long v = std::strtoll(e, &end, 10);
        if (end != e && *end == '\0') return v;
    }
    return 0;
}

inline Meta make_meta(std::uint64_t seed, const nlohmann::json& cfg) {
    Meta m;
    m.seed = seed;
    m.config_hash = config_hash(cfg);
    m.timestamp = report_timestamp();
    return m;
}

inline nlohmann::json to_json(const Report& r) {
    nlohmann::json secs = nlohmann::json::array();
    for (auto& s : r.sections) secs.push_back({{"name", s.name}, {"status", status_name(s.status)}, {"records", s.records}});
    return {{"meta",
             {{"tool_version", r.meta.tool_version},
              {"seed", r.meta.seed},
              {"config_hash", r.meta.config_hash},
              {"timestamp", r.meta.timestamp}}},
            {"sections", secs}};
}

inline Report report_from_json(const nlohmann::json& j) {
    Report r;
    auto& m = j.at("meta");
    r.meta.tool_version = m.at("tool_version").get<std::string>();
    r.meta.seed = m.at("seed").get<std::uint64_t>();
    r.meta.config_hash = m.at("config_hash").get<std::string>();
    r.meta.timestamp = m.at("timestamp").get<std::int64_t>();
    for (auto& s : j.at("sections"))
        r.sections.push_back({s.at("name").get<std::string>(), status_from_name(s.at("status").get<std::string>()),
                              s.at("records")});
    return r;
}

inline std::string dump_report(const Report& r) { return to_json(r).dump(2) + "\n"; }

inline int exit_code(const Report& r) { return r.failed() ? 1 : 0; }

// Writes `text` to `path`; throws on I/O failure.
inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw Error("write to '" + path + "' failed");
}

inline std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    char buf[40];
    for (auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            out += (i ? "," : "") + std::string(buf);
        }
        out += "\n";
    }
    return out;
}

}  // namespace lplab
