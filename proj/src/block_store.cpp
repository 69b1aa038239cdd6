#include "peerperf/block_store.hpp"

#include <spdlog/spdlog.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <mutex>
#include <nlohmann/json.hpp>

#include "peerperf/error.hpp"

namespace fs = std::filesystem;

namespace peerperf {

namespace {

std::optional<Bytes> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<Cid> read_cid_array(const fs::path& path) {
  std::vector<Cid> out;
  auto raw = read_file(path);
  if (!raw) return out;
  auto doc = nlohmann::json::parse(raw->begin(), raw->end(), nullptr, false);
  if (!doc.is_array()) {
    spdlog::error("block store: ignoring malformed {}", path.string());
    return out;
  }
  for (const auto& item : doc) {
    if (!item.is_string()) continue;
    if (auto cid = Cid::parse(item.get<std::string>())) out.push_back(*cid);
  }
  return out;
}

}  // namespace

BlockStore::BlockStore(BlockStoreOptions options)
    : options_(std::move(options)), mu_(std::make_unique<std::shared_mutex>()) {
  if (options_.root) load_from_disk();
}

BlockStore::BlockStore(const BlockStore& other) : mu_(std::make_unique<std::shared_mutex>()) {
  std::shared_lock lock(*other.mu_);
  options_ = other.options_;
  blocks_ = other.blocks_;
  total_bytes_ = other.total_bytes_;
  access_clock_ = other.access_clock_;
}

BlockStore& BlockStore::operator=(const BlockStore& other) {
  if (this != &other) {
    BlockStore copy(other);
    *this = std::move(copy);
  }
  return *this;
}

BlockStore::BlockStore(BlockStore&&) noexcept = default;
BlockStore& BlockStore::operator=(BlockStore&&) noexcept = default;
BlockStore::~BlockStore() = default;

fs::path BlockStore::block_path(const Cid& cid) const {
  auto hex = hex_encode(cid.digest());
  return *options_.root / "blocks" / hex.substr(0, 2) / (hex + ".blk");
}

void BlockStore::write_file_atomic(const fs::path& path, ByteView bytes) const {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void BlockStore::load_from_disk() {
  const auto& root = *options_.root;
  fs::create_directories(root / "blocks");
  for (const auto& entry : fs::recursive_directory_iterator(root / "blocks")) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    auto name = p.filename().string();
    if (name.find(".tmp.") != std::string::npos) {
      // Leftover from an interrupted write.
      fs::remove(p);
      continue;
    }
    if (p.extension() != ".blk") continue;
    auto cid = Cid::parse(std::string(Cid::kPrefix) + p.stem().string());
    if (!cid) continue;
    Slot slot;
    slot.info.size = static_cast<std::size_t>(entry.file_size());
    blocks_[*cid] = std::move(slot);
    total_bytes_ += blocks_[*cid].info.size;
  }
  for (const auto& cid : read_cid_array(root / "pins.json")) {
    if (auto it = blocks_.find(cid); it != blocks_.end()) it->second.info.pinned = true;
  }
  for (const auto& cid : read_cid_array(root / "local.json")) {
    if (auto it = blocks_.find(cid); it != blocks_.end()) it->second.info.origin = BlockOrigin::kLocal;
  }
}

void BlockStore::persist_sets_locked() const {
  if (!options_.root) return;
  auto pins = nlohmann::json::array();
  auto local = nlohmann::json::array();
  // std::map iteration is already in cid order.
  for (const auto& [cid, slot] : blocks_) {
    if (slot.info.pinned) pins.push_back(cid.text());
    if (slot.info.origin == BlockOrigin::kLocal) local.push_back(cid.text());
  }
  write_file_atomic(*options_.root / "pins.json", as_bytes(pins.dump()));
  write_file_atomic(*options_.root / "local.json", as_bytes(local.dump()));
}

Cid BlockStore::put_block(ByteView bytes, BlockOrigin origin) {
  if (bytes.size() > options_.max_block_size) {
    throw Error(ErrorCode::kBlockTooLarge, std::to_string(bytes.size()) + " bytes");
  }
  Cid cid = Cid::of(bytes);
  std::unique_lock lock(*mu_);
  if (auto it = blocks_.find(cid); it != blocks_.end()) {
    it->second.info.last_access = ++access_clock_;
    if (origin == BlockOrigin::kLocal && it->second.info.origin != BlockOrigin::kLocal) {
      it->second.info.origin = BlockOrigin::kLocal;
      persist_sets_locked();
    }
    return cid;
  }
  Slot slot;
  slot.info.size = bytes.size();
  slot.info.origin = origin;
  slot.info.last_access = ++access_clock_;
  if (options_.root) {
    write_file_atomic(block_path(cid), bytes);
  } else {
    slot.bytes.assign(bytes.begin(), bytes.end());
  }
  blocks_.emplace(cid, std::move(slot));
  total_bytes_ += bytes.size();
  if (origin == BlockOrigin::kLocal) persist_sets_locked();
  return cid;
}

std::optional<Bytes> BlockStore::get_block(const Cid& cid) {
  std::unique_lock lock(*mu_);
  auto it = blocks_.find(cid);
  if (it == blocks_.end()) return std::nullopt;
  std::optional<Bytes> bytes;
  if (options_.root) {
    bytes = read_file(block_path(cid));
  } else {
    bytes = it->second.bytes;
  }
  if (!bytes || !cid.matches(*bytes)) {
    spdlog::error("block store: integrity failure for {}, dropping block", cid.text());
    erase_locked(cid);
    persist_sets_locked();
    return std::nullopt;
  }
  it->second.info.last_access = ++access_clock_;
  return bytes;
}

bool BlockStore::contains(const Cid& cid) const {
  std::shared_lock lock(*mu_);
  return blocks_.contains(cid);
}

std::optional<BlockInfo> BlockStore::info(const Cid& cid) const {
  std::shared_lock lock(*mu_);
  auto it = blocks_.find(cid);
  if (it == blocks_.end()) return std::nullopt;
  return it->second.info;
}

void BlockStore::set_pin(const Cid& cid, bool pinned) {
  std::unique_lock lock(*mu_);
  auto it = blocks_.find(cid);
  if (it == blocks_.end()) throw Error(ErrorCode::kNotFound, cid.text());
  if (it->second.info.pinned == pinned) return;
  it->second.info.pinned = pinned;
  persist_sets_locked();
}

void BlockStore::erase_locked(const Cid& cid) {
  auto it = blocks_.find(cid);
  if (it == blocks_.end()) return;
  total_bytes_ -= it->second.info.size;
  blocks_.erase(it);
  if (options_.root) {
    std::error_code ec;
    fs::remove(block_path(cid), ec);
  }
}

std::vector<Cid> BlockStore::evict_unpinned(std::size_t target_bytes) {
  std::unique_lock lock(*mu_);
  std::vector<std::pair<std::uint64_t, Cid>> candidates;
  for (const auto& [cid, slot] : blocks_) {
    if (!slot.info.pinned && slot.info.origin == BlockOrigin::kReplicated) {
      candidates.emplace_back(slot.info.last_access, cid);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<Cid> evicted;
  for (const auto& [access, cid] : candidates) {
    if (total_bytes_ <= target_bytes) break;
    erase_locked(cid);
    evicted.push_back(cid);
  }
  return evicted;
}

std::size_t BlockStore::total_bytes() const {
  std::shared_lock lock(*mu_);
  return total_bytes_;
}

std::size_t BlockStore::block_count() const {
  std::shared_lock lock(*mu_);
  return blocks_.size();
}

std::vector<Cid> BlockStore::cids() const {
  std::shared_lock lock(*mu_);
  std::vector<Cid> out;
  out.reserve(blocks_.size());
  for (const auto& [cid, slot] : blocks_) out.push_back(cid);
  return out;
}

}  // namespace peerperf
