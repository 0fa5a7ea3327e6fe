#pragma once

#include <memory>
#include <string>

#include "hita/harness/campaign.hpp"
#include "hita/mldt/network.hpp"

namespace hita::mldt {

class MlTwinTarget : public harness::Target {
public:
    MlTwinTarget(std::string name, std::shared_ptr<const TrainedModel> m) : name_(std::move(name)), twin_(std::move(m)) {}
    const std::string& name() const override { return name_; }
    harness::TargetReply send(const DeviceRequest& req) override { return {twin_.step(req)}; }

private:
    std::string name_;
    MlTwin twin_;
};

}  // namespace hita::mldt
