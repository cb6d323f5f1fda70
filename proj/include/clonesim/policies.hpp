#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "clonesim/errors.hpp"
#include "clonesim/policies/mantri.hpp"
#include "clonesim/policies/offline.hpp"
#include "clonesim/policies/sca_lite.hpp"
#include "clonesim/policies/shares.hpp"
#include "clonesim/policies/srptms.hpp"

namespace clonesim {

inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"srptms+c", "srptms", "fair", "mantri", "sca-lite", "offline"};
  return names;
}

inline std::unique_ptr<Scheduler> make_policy(std::string_view name, const PolicyParams& params) {
  params.validate();
  if (name == "srptms+c") return std::make_unique<SrptmsPolicy>(params, true);
  if (name == "srptms") return std::make_unique<SrptmsPolicy>(params, false);
  if (name == "fair") return std::make_unique<FairPolicy>();
  if (name == "mantri") return std::make_unique<MantriPolicy>(params);
  if (name == "sca-lite") return std::make_unique<ScaLitePolicy>(params);
  if (name == "offline") return std::make_unique<OfflinePolicy>(RiskFactor{params.risk_factor});
  throw ContractError("unknown policy '" + std::string(name) + "'");
}

}  // namespace clonesim
