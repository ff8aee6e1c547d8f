// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace ssiot {

// PEM-encoded server credentials. Either both fields are file paths or both
// are empty, in which case an ephemeral self-signed pair is generated.
struct TlsCredentials {
  std::string cert_file;
  std::string key_file;

  bool empty() const { return cert_file.empty() && key_file.empty(); }
};

struct PemPair {
  std::string cert_pem;
  std::string key_pem;
};

// Self-signed P-256 certificate for `common_name`, valid for one year.
PemPair generate_self_signed(const std::string& common_name);

// Writes `pair` into `dir` as cert.pem/key.pem (key file mode 0600) and
// returns the paths.
TlsCredentials write_credentials(const PemPair& pair, const std::string& dir);

}  // namespace ssiot
