#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "confstream/scoring.hpp"
#include "confstream/simulator.hpp"

namespace confstream {

// JSON Lines stream format. First line is the header
//   {"k": K, "m": M, "xi": <xi>, "k_reg": <k_reg>}
// followed by one record per step
//   {"t": <int>, "probs": [[K reals] x M], "label": <int>}
// with strictly increasing t. The randomization draw u is not stored; it
// comes from the replaying run's seeded generator, so one stream can be
// replayed under different seeds.

struct StreamHeader {
    int num_classes = 0;
    int num_models = 0;
    double xi = 0.0;
    int k_reg = 1;
};

struct StreamFormatError : std::runtime_error {
    StreamFormatError(long line_number, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_number) + ": " + what), line(line_number) {}
    long line;
};

class StreamWriter {
public:
    StreamWriter(const std::string& path, const StreamHeader& header) : out_(path) {
        if (!out_) throw std::runtime_error("StreamWriter: cannot open " + path);
        nlohmann::json j{{"k", header.num_classes},
                         {"m", header.num_models},
                         {"xi", header.xi},
                         {"k_reg", header.k_reg}};
        out_ << j.dump() << '\n';
    }

    void write(long t, const ModelOutputs& outputs, int label) {
        nlohmann::json probs = nlohmann::json::array();
        for (const ProbVector& pv : outputs) probs.push_back(pv.probs);
        nlohmann::json j{{"t", t}, {"probs", std::move(probs)}, {"label", label}};
        out_ << j.dump() << '\n';
    }

private:
    std::ofstream out_;
};

namespace detail {

inline nlohmann::json parse_line(const std::string& line, long line_number) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw StreamFormatError(line_number, "invalid JSON");
    return j;
}

inline StreamHeader parse_header(const nlohmann::json& j, long line_number) {
    if (!j.is_object() || !j.contains("k") || !j.contains("m") || !j.contains("xi") || !j.contains("k_reg"))
        throw StreamFormatError(line_number, "header must carry k, m, xi, k_reg");
    StreamHeader h;
    h.num_classes = j.at("k").get<int>();
    h.num_models = j.at("m").get<int>();
    h.xi = j.at("xi").get<double>();
    h.k_reg = j.at("k_reg").get<int>();
    if (h.num_classes < 2) throw StreamFormatError(line_number, "k must be at least 2");
    if (h.num_models < 1) throw StreamFormatError(line_number, "m must be at least 1");
    if (h.xi < 0.0) throw StreamFormatError(line_number, "xi must be nonnegative");
    if (h.k_reg < 1) throw StreamFormatError(line_number, "k_reg must be at least 1");
    return h;
}

inline std::pair<long, Instance> parse_record(const nlohmann::json& j, const StreamHeader& header,
                                              long line_number) {
    if (!j.is_object() || !j.contains("t") || !j.contains("probs") || !j.contains("label"))
        throw StreamFormatError(line_number, "record must carry t, probs, label");
    Instance inst;
    const long t = j.at("t").get<long>();
    inst.label = j.at("label").get<int>();
    if (inst.label < 0 || inst.label >= header.num_classes)
        throw StreamFormatError(line_number, "label out of range");
    const nlohmann::json& probs = j.at("probs");
    if (!probs.is_array() || static_cast<int>(probs.size()) != header.num_models)
        throw StreamFormatError(line_number, "probs must hold one row per model");
    for (const nlohmann::json& row : probs) {
        if (!row.is_array() || static_cast<int>(row.size()) != header.num_classes)
            throw StreamFormatError(line_number, "probability row has wrong length");
        ProbVector pv;
        pv.probs = row.get<std::vector<double>>();
        if (!is_valid_prob_vector(pv))
            throw StreamFormatError(line_number, "probability row is not a distribution");
        inst.outputs.push_back(std::move(pv));
    }
    return {t, std::move(inst)};
}

}  // namespace detail

class StreamReader {
public:
    explicit StreamReader(const std::string& path) : in_(path) {
        if (!in_) throw std::runtime_error("StreamReader: cannot open " + path);
        std::string line;
        if (!std::getline(in_, line)) throw StreamFormatError(1, "missing header");
        ++line_number_;
        header_ = detail::parse_header(detail::parse_line(line, line_number_), line_number_);
    }

    const StreamHeader& header() const noexcept { return header_; }

    // Returns the next record, or nullopt at end of stream.
    std::optional<std::pair<long, Instance>> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_number_;
            if (line.empty()) continue;
            auto rec = detail::parse_record(detail::parse_line(line, line_number_), header_, line_number_);
            if (rec.first <= last_t_)
                throw StreamFormatError(line_number_, "timestamps must be strictly increasing");
            last_t_ = rec.first;
            return rec;
        }
        return std::nullopt;
    }

private:
    std::ifstream in_;
    StreamHeader header_;
    long line_number_ = 0;
    long last_t_ = 0;
};

struct StreamValidation {
    bool ok = true;
    std::vector<std::string> violations;
};

// Full-file schema and invariant check; collects every violation instead of
// stopping at the first one.
inline StreamValidation validate_stream(const std::string& path) {
    StreamValidation result;
    std::ifstream in(path);
    if (!in) {
        result.ok = false;
        result.violations.push_back("cannot open " + path);
        return result;
    }
    std::string line;
    long line_number = 0;
    std::optional<StreamHeader> header;
    long last_t = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        try {
            const nlohmann::json j = detail::parse_line(line, line_number);
            if (!header.has_value()) {
                header = detail::parse_header(j, line_number);
                continue;
            }
            const auto [t, inst] = detail::parse_record(j, *header, line_number);
            if (t <= last_t) throw StreamFormatError(line_number, "timestamps must be strictly increasing");
            last_t = t;
        } catch (const StreamFormatError& e) {
            result.ok = false;
            result.violations.push_back(e.what());
        }
    }
    if (!header.has_value()) {
        result.ok = false;
        result.violations.push_back("line 1: missing header");
    }
    return result;
}

}  // namespace confstream
