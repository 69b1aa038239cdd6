#pragma once

// Passphrase-gated handshake.
//
//   initiator -> HELLO{peer_id, region, nonce, proof}
//   responder -> HELLO_ACK{peer_id, region, mac, peer_list} | AUTH_FAIL
//
//   key   = derive_network_key(passphrase)
//   proof = HMAC-SHA256(key, "hello" || nonce || initiator_id)
//   mac   = HMAC-SHA256(key, nonce || responder_id)
//
// The responder refuses reused nonces; the initiator accepts an ACK only for
// a nonce it has outstanding, and consumes the nonce on first use.

#include "peerperf/protocol/messages.hpp"

namespace peerperf::protocol {

Digest hello_proof(const Digest& key, const Nonce& nonce, const PeerId& initiator);
Digest ack_mac(const Digest& key, const Nonce& nonce, const PeerId& responder);

struct HandshakeInitiation {
  Hello hello;
  Digest key{};

  Digest expected_mac(const PeerId& responder) const { return ack_mac(key, hello.nonce, responder); }
  bool accepts(const HelloAck& ack) const;
};

HandshakeInitiation handshake_initiate(std::string_view passphrase, const PeerInfo& self,
                                       const Nonce& nonce);

}  // namespace peerperf::protocol
