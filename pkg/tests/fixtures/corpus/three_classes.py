"""Fixture: three classes, seven methods."""

from dataclasses import dataclass
import math

RATE = 0.25


@dataclass
class Point:
    x: float
    y: float

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def scaled(self, k: float) -> "Point":
        """Return a scaled copy."""
        return Point(self.x * k, self.y * k)


class Account:
    """Bank account."""

    currency = "EUR"
    limits = {"daily": 500}

    def __init__(self, owner, balance=0):
        self.owner = owner
        self.balance = balance

    def deposit(self, amount):
        if amount <= 0:
            raise ValueError("amount must be positive")
        self.balance += amount
        return self.balance

    # withdrawals respect the daily limit
    def withdraw(self, amount):
        if amount > self.limits["daily"]:
            raise ValueError("over limit")
        self.balance -= amount
        return self.balance


class Ledger(list):
    def total(self):
        return sum(a.balance for a in self)

    @staticmethod
    def empty():
        return Ledger()


def interest(balance, years=1):
    return balance * (1 + RATE) ** years
