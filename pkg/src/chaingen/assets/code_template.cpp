// Extended reference example: MQTT-driven decision logic with VSS actuation.
// Structure and dependencies only; the generated module replaces the topic
// names, decision logic, and actuator callers with scenario-specific ones.
#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <mqtt/async_client.h>
#include <capnproto/types/vehicle/acceleration.h>

static const std::string BROKER_URI = "tcp://localhost:1883";
static const std::string CLIENT_ID = "adas-decision-module";

int ret = 0;
uint64_t result_id = 0;

void call_runner() {
    auto set_acceleration = create_caller<types::vehicle::Acceleration>();

    types::vehicle::Acceleration acceleration_value{};
    acceleration_value.set_longitudinal(
        acceleration_value.longitudinal() + 0.2
    );
    ret = set_acceleration.call(acceleration_value, &result_id);
    std::cout << "Actuator triggered: acceleration" << std::endl;
}

class MessageHandler : public virtual mqtt::callback {
public:
    void message_arrived(mqtt::const_message_ptr msg) override {
        std::cout << "Message received on " << msg->get_topic()
                  << ": " << msg->to_string() << std::endl;
        if (msg->to_string() == "1") {
            call_runner();
        }
    }
};

int main() {
    mqtt::async_client client(BROKER_URI, CLIENT_ID);
    MessageHandler handler;
    client.set_callback(handler);

    client.connect()->wait();
    client.subscribe("example-topic", 1)->wait();

    while (true) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return 0;
}
