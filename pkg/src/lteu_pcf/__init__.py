"""Wi-Fi / duty-cycled LTE-U coexistence: simulator, closed-form model and PCF fairness scheme."""

__version__ = "0.1.0"
