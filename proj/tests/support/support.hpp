#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hita/common/rng.hpp"
#include "hita/harness/campaign.hpp"
#include "hita/harness/targets.hpp"
#include "hita/mbdt/twin.hpp"
#include "hita/model/parser.hpp"

namespace hita::test {

// The shipped model, parsed once.
const mbdt::ModelPtr& medido();

// Fresh directory under the system temp dir; removed by the destructor.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "hita");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

mbdt::ExecutableDT medido_twin(std::uint64_t seed = 42, const std::string& id = "dt-test", const Json& inputs = Json::object());

harness::CampaignConfig small_campaign(std::uint64_t seed, std::uint64_t requests);

// Two identical model-based twins "a" and "b" on one seeded stream.
harness::PairedResponses self_paired(Rng& rng, std::size_t requests);

// Runs cfg's schedule against an MBDT named "mbdt" and a reference device named "ref".
harness::CampaignResult mbdt_vs_ref(const harness::CampaignConfig& cfg, const refdev::RefDeviceConfig& ref = {});

}  // namespace hita::test
