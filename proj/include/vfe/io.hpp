#pragma once

// Series files (CSV, 17 significant digits), run manifests (JSON with SHA-256
// checksums) and static SVG plots.

#include "vfe/errors.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vfe {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest-safe text form of a double: 17 significant digits, always round-trips.
inline std::string format_double(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s)
{
    if (s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf")
        return std::numeric_limits<double>::infinity();
    if (s == "-inf")
        return -std::numeric_limits<double>::infinity();
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ArgumentError("parse_double: not a number: '" + std::string(s) + "'");
    return x;
}

/// Column-major description of a plain-text table: header line of channel
/// names, optional "# key=value" metadata lines, then one row per sample.
struct SeriesFile {
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::vector<double>> rows;

    std::size_t column_index(std::string_view name) const
    {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end())
            throw ArgumentError("SeriesFile: no column '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }
    std::vector<double> column(std::string_view name) const
    {
        const std::size_t k = column_index(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows)
            out.push_back(r[k]);
        return out;
    }
};

/// Build a series from equally long columns.
inline SeriesFile make_series(std::vector<std::string> names, const std::vector<std::vector<double>>& columns)
{
    if (names.size() != columns.size())
        throw ArgumentError("make_series: name count does not match column count");
    SeriesFile s;
    s.columns = std::move(names);
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
        if (c.size() != n)
            throw ArgumentError("make_series: columns differ in length");
    s.rows.assign(n, std::vector<double>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j)
        for (std::size_t i = 0; i < n; ++i)
            s.rows[i][j] = columns[j][i];
    return s;
}

inline void validate_series(const SeriesFile& s)
{
    if (s.columns.empty() || s.rows.empty())
        throw ArgumentError("series is empty");
    for (const auto& r : s.rows)
        if (r.size() != s.columns.size())
            throw ArgumentError("series rows must all have " + std::to_string(s.columns.size()) + " columns");
    if (s.columns.front() == "t")
        for (std::size_t i = 1; i < s.rows.size(); ++i)
            if (!(s.rows[i][0] > s.rows[i - 1][0]))
                throw ArgumentError("series time column is not increasing at row " + std::to_string(i));
}

inline std::string series_text(const SeriesFile& s)
{
    validate_series(s);
    std::string out;
    for (std::size_t j = 0; j < s.columns.size(); ++j) {
        out += j ? "," : "";
        out += s.columns[j];
    }
    out += '\n';
    for (const auto& [k, v] : s.metadata)
        out += "# " + k + "=" + v + "\n";
    for (const auto& r : s.rows) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j)
                out += ',';
            out += format_double(r[j]);
        }
        out += '\n';
    }
    return out;
}

inline void write_text(const std::filesystem::path& path, std::string_view text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f)
        throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path.string() + "' for reading");
    return std::string(std::istreambuf_iterator<char>(f), {});
}

inline void write_series(const SeriesFile& s, const std::filesystem::path& path) { write_text(path, series_text(s)); }

inline SeriesFile parse_series(std::string_view text, const std::string& origin = "<memory>")
{
    SeriesFile s;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    auto split = [](std::string_view line) {
        std::vector<std::string_view> parts;
        std::size_t start = 0;
        while (true) {
            const std::size_t c = line.find(',', start);
            parts.push_back(line.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
            if (c == std::string_view::npos)
                break;
            start = c + 1;
        }
        return parts;
    };
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty())
            continue;
        if (s.columns.empty()) {
            for (auto p : split(line))
                s.columns.emplace_back(p);
            continue;
        }
        if (line.front() == '#') {
            std::string_view kv = line.substr(1);
            while (!kv.empty() && kv.front() == ' ')
                kv.remove_prefix(1);
            const std::size_t eq = kv.find('=');
            s.metadata.emplace_back(std::string(kv.substr(0, eq)),
                                    eq == std::string_view::npos ? std::string() : std::string(kv.substr(eq + 1)));
            continue;
        }
        const auto parts = split(line);
        if (parts.size() != s.columns.size())
            throw IoError(origin + ":" + std::to_string(line_no) + ": expected " + std::to_string(s.columns.size()) +
                          " fields, found " + std::to_string(parts.size()));
        std::vector<double> row;
        row.reserve(parts.size());
        try {
            for (auto p : parts)
                row.push_back(parse_double(p));
        } catch (const ArgumentError& e) {
            throw IoError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
        s.rows.push_back(std::move(row));
    }
    if (s.columns.empty())
        throw IoError(origin + ": missing header line");
    return s;
}

inline SeriesFile read_series(const std::filesystem::path& path)
{
    return parse_series(read_text(path), path.string());
}

/// Lower-case hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view bytes)
{
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
        throw NumericalError("sha256: digest computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

struct ArtifactEntry {
    std::string file; // relative to the manifest directory
    std::string sha256;
    friend bool operator==(const ArtifactEntry&, const ArtifactEntry&) = default;
};

struct RunManifest {
    std::string command;
    nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
    nlohmann::ordered_json results = nlohmann::ordered_json::object();
    std::string version{kToolVersion};
    std::vector<ArtifactEntry> artifacts;
};

inline nlohmann::ordered_json manifest_json(const RunManifest& m)
{
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["version"] = m.version;
    j["parameters"] = m.parameters;
    j["results"] = m.results;
    j["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& a : m.artifacts)
        j["artifacts"].push_back({{"file", a.file}, {"sha256", a.sha256}});
    return j;
}

inline RunManifest manifest_from_json(const nlohmann::ordered_json& j)
{
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.parameters = j.at("parameters");
        m.results = j.value("results", nlohmann::ordered_json::object());
        for (const auto& a : j.at("artifacts"))
            m.artifacts.push_back({a.at("file").get<std::string>(), a.at("sha256").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("manifest: ") + e.what());
    }
    return m;
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path)
{
    write_text(path, manifest_json(m).dump(2) + "\n");
}

inline RunManifest read_manifest(const std::filesystem::path& path)
{
    try {
        return manifest_from_json(nlohmann::ordered_json::parse(read_text(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

/// Record `file` (relative to `dir`) with its current checksum.
inline void add_artifact(RunManifest& m, const std::filesystem::path& dir, const std::string& file)
{
    m.artifacts.push_back({file, sha256_file(dir / file)});
}

/// Files whose bytes no longer match the recorded checksum.
inline std::vector<std::string> stale_artifacts(const RunManifest& m, const std::filesystem::path& dir)
{
    std::vector<std::string> bad;
    for (const auto& a : m.artifacts) {
        std::error_code ec;
        if (!std::filesystem::exists(dir / a.file, ec) || sha256_file(dir / a.file) != a.sha256)
            bad.push_back(a.file);
    }
    return bad;
}

// ---------------------------------------------------------------------------
// SVG

enum class MarkStyle { line, dots, stars };

struct PlotChannel {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    MarkStyle style = MarkStyle::line;
    std::string color = "#1f4e9c";
};

struct PlotStyle {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 480;
    bool equal_aspect = false; // for planar curves
};

namespace detail {

inline std::string svg_num(double x)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}

inline std::string svg_escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string tick_label(double v)
{
    char buf[32];
    const double a = std::abs(v);
    const auto fmt = (a != 0.0 && (a < 1e-3 || a >= 1e5)) ? std::chars_format::scientific : std::chars_format::general;
    const auto res = std::to_chars(buf, buf + sizeof buf, v, fmt, 4);
    return std::string(buf, res.ptr);
}

} // namespace detail

/// Standalone SVG document; identical inputs give identical bytes.
inline std::string render_svg(const std::vector<PlotChannel>& channels, const PlotStyle& style = {})
{
    if (channels.empty())
        throw ArgumentError("render_svg: no channels");
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& c : channels) {
        if (c.x.empty() || c.x.size() != c.y.size())
            throw ArgumentError("render_svg: channel '" + c.label + "' is empty or has mismatched x/y");
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i]))
                continue;
            x0 = std::min(x0, c.x[i]);
            x1 = std::max(x1, c.x[i]);
            y0 = std::min(y0, c.y[i]);
            y1 = std::max(y1, c.y[i]);
        }
    }
    if (!std::isfinite(x0) || !std::isfinite(y0))
        throw ArgumentError("render_svg: no finite points");
    if (x1 - x0 <= 0.0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if (y1 - y0 <= 0.0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double ml = 80, mr = 20, mt = 40, mb = 55;
    double pw = style.width - ml - mr, ph = style.height - mt - mb;
    if (style.equal_aspect) {
        const double sx = pw / (x1 - x0), sy = ph / (y1 - y0);
        if (sx < sy)
            ph = (y1 - y0) * sx;
        else
            pw = (x1 - x0) * sy;
    }
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + ph - (y - y0) / (y1 - y0) * ph; };
    using detail::svg_num;

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
      << "\" viewBox=\"0 0 " << style.width << ' ' << style.height << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    if (!style.title.empty())
        o << "<text x=\"" << svg_num(style.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
          << detail::svg_escape(style.title) << "</text>\n";
    o << "<rect x=\"" << svg_num(ml) << "\" y=\"" << svg_num(mt) << "\" width=\"" << svg_num(pw) << "\" height=\""
      << svg_num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        o << "<text x=\"" << svg_num(px(xv)) << "\" y=\"" << svg_num(mt + ph + 18) << "\" text-anchor=\"middle\">"
          << detail::tick_label(xv) << "</text>\n";
        o << "<text x=\"" << svg_num(ml - 6) << "\" y=\"" << svg_num(py(yv) + 4) << "\" text-anchor=\"end\">"
          << detail::tick_label(yv) << "</text>\n";
    }
    if (!style.x_label.empty())
        o << "<text x=\"" << svg_num(ml + pw / 2) << "\" y=\"" << svg_num(mt + ph + 40)
          << "\" text-anchor=\"middle\">" << detail::svg_escape(style.x_label) << "</text>\n";
    if (!style.y_label.empty())
        o << "<text x=\"16\" y=\"" << svg_num(mt + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
          << svg_num(mt + ph / 2) << ")\">" << detail::svg_escape(style.y_label) << "</text>\n";

    for (std::size_t ci = 0; ci < channels.size(); ++ci) {
        const auto& c = channels[ci];
        const std::string col = detail::svg_escape(c.color);
        if (c.style == MarkStyle::line) {
            o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1\" points=\"";
            bool first = true;
            for (std::size_t i = 0; i < c.x.size(); ++i) {
                if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i]))
                    continue;
                o << (first ? "" : " ") << svg_num(px(c.x[i])) << ',' << svg_num(py(c.y[i]));
                first = false;
            }
            o << "\"/>\n";
        } else {
            o << "<g fill=\"" << col << "\">\n";
            for (std::size_t i = 0; i < c.x.size(); ++i) {
                if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i]))
                    continue;
                const double cx = px(c.x[i]), cy = py(c.y[i]);
                if (c.style == MarkStyle::dots) {
                    o << "<circle cx=\"" << svg_num(cx) << "\" cy=\"" << svg_num(cy) << "\" r=\"1.5\"/>\n";
                } else {
                    o << "<polygon points=\"";
                    for (int k = 0; k < 10; ++k) {
                        const double r = (k % 2 == 0) ? 5.0 : 2.2;
                        const double ang = -std::numbers::pi / 2 + k * std::numbers::pi / 5;
                        o << (k ? " " : "") << svg_num(cx + r * std::cos(ang)) << ',' << svg_num(cy + r * std::sin(ang));
                    }
                    o << "\"/>\n";
                }
            }
            o << "</g>\n";
        }
        const double ly = mt + 14 + 16.0 * static_cast<double>(ci);
        o << "<rect x=\"" << svg_num(ml + pw - 150) << "\" y=\"" << svg_num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
          << col << "\"/>\n";
        o << "<text x=\"" << svg_num(ml + pw - 135) << "\" y=\"" << svg_num(ly) << "\">" << detail::svg_escape(c.label)
          << "</text>\n";
    }
    o << "</g>\n</svg>\n";
    return o.str();
}

inline void write_svg(const std::filesystem::path& path, const std::vector<PlotChannel>& channels,
                      const PlotStyle& style = {})
{
    write_text(path, render_svg(channels, style));
}

} // namespace vfe
