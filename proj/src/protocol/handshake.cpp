#include "peerperf/protocol/handshake.hpp"

namespace peerperf::protocol {

Digest hello_proof(const Digest& key, const Nonce& nonce, const PeerId& initiator) {
  Bytes msg = to_bytes("hello");
  msg.insert(msg.end(), nonce.begin(), nonce.end());
  auto id = initiator.bytes();
  msg.insert(msg.end(), id.begin(), id.end());
  return hmac_sha256(key, msg);
}

Digest ack_mac(const Digest& key, const Nonce& nonce, const PeerId& responder) {
  Bytes msg(nonce.begin(), nonce.end());
  auto id = responder.bytes();
  msg.insert(msg.end(), id.begin(), id.end());
  return hmac_sha256(key, msg);
}

bool HandshakeInitiation::accepts(const HelloAck& ack) const {
  return constant_time_equal(expected_mac(ack.peer_id), ack.mac);
}

HandshakeInitiation handshake_initiate(std::string_view passphrase, const PeerInfo& self,
                                       const Nonce& nonce) {
  HandshakeInitiation out;
  out.key = derive_network_key(passphrase);
  out.hello = Hello{self.id, self.region, nonce, hello_proof(out.key, nonce, self.id), self.address};
  return out;
}

}  // namespace peerperf::protocol
