#include "support.hpp"

#include <atomic>
#include <unistd.h>

namespace hita::test {

const mbdt::ModelPtr& medido() {
    static const mbdt::ModelPtr m = std::make_shared<const model::DeviceModel>(model::load_model_file(HITA_MODEL_FILE));
    return m;
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

mbdt::ExecutableDT medido_twin(std::uint64_t seed, const std::string& id, const Json& inputs) {
    return mbdt::make_executable(mbdt::instantiate(medido(), inputs, harness::kCampaignStart), seed, id);
}

harness::CampaignConfig small_campaign(std::uint64_t seed, std::uint64_t requests) {
    harness::CampaignConfig c;
    c.seed = seed;
    c.requests = requests;
    return c;
}

harness::PairedResponses self_paired(Rng& rng, std::size_t requests) {
    auto cfg = small_campaign(rng.next(), requests);
    cfg.reference = "b";
    std::vector<std::unique_ptr<harness::Target>> targets;
    targets.push_back(std::make_unique<harness::MbdtTarget>("a", medido_twin(1, "a")));
    targets.push_back(std::make_unique<harness::MbdtTarget>("b", medido_twin(1, "b")));
    return harness::run_campaign(cfg, medido()->api, targets).paired;
}

harness::CampaignResult mbdt_vs_ref(const harness::CampaignConfig& cfg, const refdev::RefDeviceConfig& ref) {
    std::vector<std::unique_ptr<harness::Target>> targets;
    targets.push_back(std::make_unique<harness::MbdtTarget>("mbdt", medido_twin(cfg.seed, "mbdt")));
    targets.push_back(std::make_unique<harness::RefDeviceTarget>("ref", ref));
    auto c = cfg;
    c.reference = "ref";
    return harness::run_campaign(c, medido()->api, targets);
}

}  // namespace hita::test
