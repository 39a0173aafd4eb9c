#pragma once

// Backend driven by a caller-supplied function. Tests use it to inject
// malformed output, slow responses and fixed verdicts; replay builds one
// from a recorded trace.

#include "sketch2svg/model_gateway.hpp"

#include <functional>
#include <mutex>
#include <string>
#include <utility>

namespace sketch2svg {

class ScriptedBackend : public ModelBackend {
public:
    using Responder = std::function<std::string(const ModelRequest&)>;

    explicit ScriptedBackend(Responder responder, std::string name = "scripted", bool serialize = false)
        : responder_(std::move(responder)), name_(std::move(name)), serialize_(serialize) {}

    std::string complete(const ModelRequest& request) override {
        if (!serialize_) return responder_(request);
        std::lock_guard lock(mutex_);
        return responder_(request);
    }

    [[nodiscard]] std::string name() const override { return name_; }

private:
    Responder responder_;
    std::string name_;
    bool serialize_;
    std::mutex mutex_;
};

/// Wraps another backend, e.g. to delay or count calls.
class DelegatingBackend : public ModelBackend {
public:
    using Hook = std::function<std::string(const ModelRequest&, ModelBackend& inner)>;

    DelegatingBackend(std::shared_ptr<ModelBackend> inner, Hook hook)
        : inner_(std::move(inner)), hook_(std::move(hook)) {}

    std::string complete(const ModelRequest& request) override { return hook_(request, *inner_); }
    [[nodiscard]] std::string name() const override { return inner_->name(); }

private:
    std::shared_ptr<ModelBackend> inner_;
    Hook hook_;
};

}  // namespace sketch2svg
