#include "ure/binary_io.hpp"

#include "ure/error.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

namespace ure::io {

void ByteWriter::magic(std::string_view tag) {
    for (char c : tag) {
        buffer_.push_back(static_cast<std::byte>(c));
    }
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        buffer_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
    }
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        buffer_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
    }
}

void ByteWriter::bytes(std::span<const std::byte> data) { buffer_.insert(buffer_.end(), data.begin(), data.end()); }

void ByteWriter::string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    magic(s);
}

void ByteReader::need(std::size_t n) const {
    if (remaining() < n) {
        fail(ErrorCode::kTruncated, "unexpected end of data at byte " + std::to_string(pos_) + " (need " +
                                        std::to_string(n) + ", have " + std::to_string(remaining()) + ")");
    }
}

bool ByteReader::magic(std::string_view tag) {
    need(tag.size());
    bool ok = true;
    for (std::size_t i = 0; i < tag.size(); ++i) {
        ok = ok && static_cast<char>(data_[pos_ + i]) == tag[i];
    }
    pos_ += tag.size();
    return ok;
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    }
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    }
    pos_ += 8;
    return v;
}

std::string ByteReader::string() {
    const std::uint32_t n = u32();
    need(n);
    std::string out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        out.push_back(static_cast<char>(data_[pos_ + i]));
    }
    pos_ += n;
    return out;
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
    }
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = static_cast<std::byte>(raw[i]);
    }
    return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> data) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) {
        fail(ErrorCode::kIo, "short write to '" + path.string() + "'");
    }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

}  // namespace ure::io
