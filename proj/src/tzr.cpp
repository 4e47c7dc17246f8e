#include "glformer/tzr.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "TZR payload I/O assumes a little-endian host");

namespace glformer {

void write_tzr(std::ostream& os, const Tensor& t) {
    std::string header = "{\"dtype\":\"f64\",\"shape\":[";
    for (std::size_t i = 0; i < t.ndim(); ++i) {
        if (i) header += ',';
        header += std::to_string(t.dim(i));
    }
    header += "]}\n";
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!os) throw IoError("TZR write failed");
}

void write_tzr(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_tzr(os, t);
}

std::string tzr_bytes(const Tensor& t) {
    std::ostringstream os(std::ios::binary);
    write_tzr(os, t);
    return os.str();
}

Tensor read_tzr(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw IoError("TZR: missing header line");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(std::string("TZR: bad header: ") + e.what());
    }
    if (!j.is_object() || j.value("dtype", "") != "f64" || !j.contains("shape") ||
        !j["shape"].is_array()) {
        throw IoError("TZR: header must be {\"dtype\":\"f64\",\"shape\":[...]}");
    }
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (const auto& d : j["shape"]) {
        if (!d.is_number_unsigned() && !(d.is_number_integer() && d.get<long long>() >= 0)) {
            throw IoError("TZR: shape entries must be non-negative integers");
        }
        shape.push_back(d.get<std::size_t>());
        count *= shape.back();
    }

    std::vector<double> data(count);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(is.gcount()) != count * sizeof(double)) {
        throw IoError("TZR: payload truncated, expected " + std::to_string(count) + " values");
    }
    // A valid file ends exactly at the payload.
    if (is.peek() != std::char_traits<char>::eof()) {
        throw IoError("TZR: trailing bytes after payload");
    }
    return Tensor(std::move(shape), std::move(data));
}

Tensor read_tzr(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string() + " for reading");
    return read_tzr(is);
}

} // namespace glformer
