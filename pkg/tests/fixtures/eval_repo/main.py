from shop import Customer
from shop.cart import Cart


def demo():
    alice = Customer("alice", tier="gold")
    cart = Cart(alice)
    cart.add("apple", 0.5, 6).add("pear", 0.75, 2)
    print(cart.total())
    return cart.checkout()


if __name__ == "__main__":
    demo()
