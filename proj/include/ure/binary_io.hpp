#pragma once

// Little-endian field encoding shared by the on-disk formats (URE1, IMG1, CKPT).

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ure::io {

class ByteWriter {
   public:
    void magic(std::string_view tag);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::span<const std::byte> data);
    void string(std::string_view s);  // u32 length prefix

    [[nodiscard]] const std::vector<std::byte>& buffer() const noexcept { return buffer_; }
    [[nodiscard]] std::vector<std::byte> take() noexcept { return std::move(buffer_); }

   private:
    std::vector<std::byte> buffer_;
};

/// Bounds-checked reader; running past the end raises ErrorCode::kTruncated.
class ByteReader {
   public:
    explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

    [[nodiscard]] bool magic(std::string_view tag);
    std::uint32_t u32();
    std::uint64_t u64();
    float f32() { return std::bit_cast<float>(u32()); }
    std::string string();
    [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }

   private:
    void need(std::size_t n) const;

    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
};

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> data);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ure::io
