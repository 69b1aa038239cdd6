#pragma once

// Content-addressed block store.
//
// Invariants:
//   * a block is stored under Cid::of(bytes), and get_block() re-verifies the
//     digest before returning anything read from disk;
//   * pinned blocks and local-origin blocks are never evicted;
//   * writes go to a temp file that is renamed into place, so a crash never
//     leaves a partially written block visible.
//
// Without a root directory the store is memory-only (used by the simulator).
// Layout on disk:
//   <root>/blocks/<hex[0..2]>/<hex>.blk
//   <root>/pins.json      sorted array of pinned cid text forms
//   <root>/local.json     sorted array of local-origin cid text forms

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "peerperf/cid.hpp"

namespace peerperf {

enum class BlockOrigin { kLocal, kReplicated };

struct BlockInfo {
  std::size_t size = 0;
  bool pinned = false;
  BlockOrigin origin = BlockOrigin::kReplicated;
  std::uint64_t last_access = 0;
};

struct BlockStoreOptions {
  std::optional<std::filesystem::path> root;
  std::size_t max_block_size = 1u << 20;
};

class BlockStore {
 public:
  BlockStore() : BlockStore(BlockStoreOptions{}) {}
  explicit BlockStore(BlockStoreOptions options);
  BlockStore(const BlockStore& other);
  BlockStore& operator=(const BlockStore& other);
  BlockStore(BlockStore&&) noexcept;
  BlockStore& operator=(BlockStore&&) noexcept;
  ~BlockStore();

  // Throws Error(kBlockTooLarge). Storing known bytes again only refreshes
  // the access time (and upgrades the origin to local if requested).
  Cid put_block(ByteView bytes, BlockOrigin origin = BlockOrigin::kLocal);

  // Returns nullopt if the block is absent or fails integrity verification.
  // A corrupt block is logged and dropped from the store.
  std::optional<Bytes> get_block(const Cid& cid);

  bool contains(const Cid& cid) const;
  std::optional<BlockInfo> info(const Cid& cid) const;

  static bool verify(const Cid& cid, ByteView bytes) { return cid.matches(bytes); }

  // Throws Error(kNotFound) if the block is absent.
  void set_pin(const Cid& cid, bool pinned);

  // Evicts least recently accessed unpinned replicated blocks until the
  // stored byte total is <= target_bytes or nothing evictable remains.
  std::vector<Cid> evict_unpinned(std::size_t target_bytes);

  std::size_t total_bytes() const;
  std::size_t block_count() const;
  std::vector<Cid> cids() const;
  std::size_t max_block_size() const { return options_.max_block_size; }
  const std::optional<std::filesystem::path>& root() const { return options_.root; }

  std::filesystem::path block_path(const Cid& cid) const;

 private:
  struct Slot {
    BlockInfo info;
    Bytes bytes;  // memory mode only
  };

  void load_from_disk();
  void persist_sets_locked() const;
  void write_file_atomic(const std::filesystem::path& path, ByteView bytes) const;
  void erase_locked(const Cid& cid);

  BlockStoreOptions options_;
  std::map<Cid, Slot> blocks_;
  std::size_t total_bytes_ = 0;
  std::uint64_t access_clock_ = 0;
  mutable std::unique_ptr<std::shared_mutex> mu_;
};

}  // namespace peerperf
