from .models import Item, Customer
