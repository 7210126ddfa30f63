import enum


class Lab(enum.StrEnum):
    PHONE = enum.auto()
    EDGE = enum.auto()
    SIM = enum.auto()


class Platform(enum.StrEnum):
    ANDROID = enum.auto()
    IOS = enum.auto()
    LINUX = enum.auto()
    SIM = enum.auto()


class Tier(enum.StrEnum):
    MID = enum.auto()
    HIGH = enum.auto()


class PowerSource(enum.StrEnum):
    MONSOON = enum.auto()
    SYSFS = enum.auto()
    SIM = enum.auto()


class PowerAction(enum.StrEnum):
    ON = enum.auto()
    OFF = enum.auto()


class Rail(enum.StrEnum):
    CPU = "CPU"
    GPU = "GPU"
    SOC = "SOC"
    DDR = "DDR"
    TOTAL = "TOTAL"
    OTHER = "other"


# Which power source each lab is wired to, unless the device is simulated.
LAB_POWER_SOURCE: dict[Lab, PowerSource] = {
    Lab.PHONE: PowerSource.MONSOON,
    Lab.EDGE: PowerSource.SYSFS,
}
