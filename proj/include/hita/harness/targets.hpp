#pragma once

#include <memory>
#include <string>

#include "hita/harness/campaign.hpp"
#include "hita/mbdt/twin.hpp"
#include "hita/refdev/ref_device.hpp"

namespace hita::harness {

class MbdtTarget : public Target {
public:
    MbdtTarget(std::string name, mbdt::ExecutableDT dt) : name_(std::move(name)), dt_(std::move(dt)) {}
    const std::string& name() const override { return name_; }
    TargetReply send(const DeviceRequest& req) override { return {dt_.step(req, req.virtual_now)}; }
    mbdt::ExecutableDT& twin() { return dt_; }

private:
    std::string name_;
    mbdt::ExecutableDT dt_;
};

class RefDeviceTarget : public Target {
public:
    RefDeviceTarget(std::string name, refdev::RefDeviceConfig cfg) : name_(std::move(name)), dev_(std::move(cfg)) {}
    const std::string& name() const override { return name_; }
    TargetReply send(const DeviceRequest& req) override { return {dev_.handle(req, req.virtual_now)}; }
    refdev::RefDevice& device() { return dev_; }

private:
    std::string name_;
    refdev::RefDevice dev_;
};

// POSTs the request JSON to url+path; the "twin" block dt-server adds is dropped.
class HttpTarget : public Target {
public:
    explicit HttpTarget(TargetSpec spec);
    ~HttpTarget() override;
    const std::string& name() const override { return spec_.name; }
    TargetReply send(const DeviceRequest& req) override;

private:
    struct Impl;
    TargetSpec spec_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hita::harness
